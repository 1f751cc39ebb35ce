"""Tour of the tabular data pipeline.

Synthesizes a heart-study-shaped cohort, writes it to CSV with missing
cells, loads it back through the schema-aware reader, splits it into
train/test, partitions the training rows across simulated clients, and
balances the minority class three different ways.

Run:  python3 demos/01_dataset_and_resampling.py
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fedchd import (
    SamplingStrategy,
    apply_sampling,
    load_csv,
    partition_clients,
    stratified_split,
    synthetic_cohort,
    write_cohort_csv,
)


def banner(title: str) -> None:
    print(f"\n--- {title} " + "-" * max(0, 60 - len(title)))


def describe(name: str, table) -> None:
    neg, pos = table.class_counts()
    print(f"{name:<28} rows={len(table):>5}  neg={neg:>5}  pos={pos:>5}  "
          f"positive_rate={table.positive_rate():.3f}")


def main() -> None:
    banner("synthesize a cohort")
    cohort = synthetic_cohort(n_rows=2000, seed=7)
    describe("synthetic cohort", cohort)
    print(f"features: {cohort.schema.names}")

    banner("CSV round trip with missing cells")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "cohort.csv"
        write_cohort_csv(cohort, path, missing_fraction=0.02, seed=7)
        imputed = load_csv(path, on_missing="impute")
        dropped = load_csv(path, on_missing="drop")
    describe("loaded, median/mode impute", imputed)
    describe("loaded, incomplete dropped", dropped)

    banner("stratified split and client partition")
    train, test = stratified_split(cohort, test_fraction=0.2, seed=7)
    describe("train", train)
    describe("test", test)
    parts = partition_clients(train, n_clients=3, seed=7)
    for i, part in enumerate(parts):
        describe(f"client {i}", part)

    banner("rebalancing one client")
    client = parts[0]
    for strategy in (SamplingStrategy.ROS, SamplingStrategy.RUS,
                     SamplingStrategy.LOCAL_SMOTE):
        balanced = apply_sampling(client, strategy, seed=7)
        describe(f"after {strategy.value}", balanced)
    print("\nros duplicates minority rows, rus discards majority rows, and")
    print("smote interpolates new minority rows between standardized")
    print("nearest neighbors (binary columns are re-rounded to 0/1).")


if __name__ == "__main__":
    main()
