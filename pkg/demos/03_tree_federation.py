"""Two single-round tree protocols with byte accounting.

Forest federation: each client fits a random forest and uploads only a
sampled subset of its trees (square-root rule or a fixed fraction); the
server concatenates the subsets into one majority-vote forest.

Boosted-tree feature extraction: each client fits a full gradient-boosted
ensemble, keeps it private, and uploads a single shallow tree built on its
top-p features by total gain. The server weights each shallow tree by the
client's share of the data. The ledger records the unsent full-ensemble
sizes as reference entries, which makes the bandwidth saving measurable.

Run:  python3 demos/03_tree_federation.py
"""

from __future__ import annotations

from fedchd import (
    CommLedger,
    ForestConfig,
    GbtConfig,
    SamplingStrategy,
    SubsetPolicy,
    evaluate,
    make_clients,
    partition_clients,
    run_forest_federation,
    run_xgb_feature_extraction,
    stratified_split,
    synthetic_cohort,
)

SEED = 11


def banner(title: str) -> None:
    print(f"\n--- {title} " + "-" * max(0, 60 - len(title)))


def main() -> None:
    cohort = synthetic_cohort(n_rows=2400, seed=SEED)
    train, test = stratified_split(cohort, test_fraction=0.2, seed=SEED)
    clients = make_clients(partition_clients(train, n_clients=3, seed=SEED))
    config = ForestConfig(n_trees=50, max_depth=8)
    print(f"{len(clients)} clients, {config.n_trees} trees each, "
          f"test set {len(test)} rows")

    banner("forest federation under different subset policies")
    for policy in (SubsetPolicy.fraction_of(1.0), SubsetPolicy.sqrt_k(),
                   SubsetPolicy.fraction_of(0.3)):
        ledger = CommLedger()
        model = run_forest_federation(
            clients, forest_config=config, policy=policy,
            sampling=SamplingStrategy.LOCAL_SMOTE, ledger=ledger, seed=SEED,
        )
        report = evaluate(model.predict(test.X), test.y)
        print(f"{policy.describe():<18} union={len(model.ensemble.trees):>3} trees  "
              f"f1={report.f1:.3f}  recall={report.recall:.3f}  "
              f"uploaded={ledger.up_bytes():>7,} bytes")
    print("\neach client keeps the same local forest; only the uploaded"
          "\nsubset changes, so bytes scale with the policy.")

    banner("boosted trees with top-p feature extraction")
    ledger = CommLedger()
    model = run_xgb_feature_extraction(
        clients, gbt_config=GbtConfig(n_rounds=30, max_depth=3),
        p=8, shallow_depth=4,
        sampling=SamplingStrategy.LOCAL_SMOTE, ledger=ledger, seed=SEED,
    )
    report = evaluate(model.predict(test.X), test.y)
    print(f"weighted shallow trees: f1={report.f1:.3f}  "
          f"recall={report.recall:.3f}")
    print(f"tree weights (data shares): "
          f"{[round(w, 3) for w in model.ensemble.weights.tolist()]}")
    uploaded = ledger.up_bytes()
    private = sum(ledger.references.values())
    print(f"uploaded {uploaded:,} bytes; the full local ensembles "
          f"({private:,} bytes) never left the clients")
    print(f"compression vs sending full ensembles: {private / uploaded:.1f}x")


if __name__ == "__main__":
    main()
