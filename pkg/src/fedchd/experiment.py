"""Config-driven experiment runner: single runs, paired comparisons, grids.

Configs are JSON documents; ``run`` executes one (model, mode, sampling)
cell once per seed, ``compare`` pairs two runs seed by seed and applies the
paired t-test, and ``sweep`` executes a cell grid, flagging failed cells
instead of aborting. Reports split into a deterministic payload (stable
bytes for a fixed config) and a timing sidecar that is excluded from any
determinism comparison. Each report is also summarized as a flat CSV.

The dataset_path value "synthetic" (optionally "synthetic:SEED" or
"synthetic:SEED:ROWS") generates a stand-in cohort instead of reading a
file. Environment variables FEDCHD_DATASET and FEDCHD_OUTPUT override
dataset_path and output_path; nothing else is overridable.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from itertools import product
from pathlib import Path

import numpy as np

from .data import (
    DEFAULT_DROP_COLUMNS,
    FRAMINGHAM_SCHEMA,
    DataTable,
    FeatureSchema,
    SamplingStrategy,
    apply_sampling,
    load_csv,
    partition_clients,
    stratified_split,
)
from .federation import (
    CommLedger,
    DpConfig,
    SubsetPolicy,
    fit_feature_scaler,
    make_clients,
    run_forest_federation,
    run_parametric_federation,
    run_xgb_feature_extraction,
)
from .metrics import evaluate, paired_t_test
from .parametric import (
    LogisticConfig,
    NeuralNetConfig,
    SvmConfig,
    init_nn_params,
    nn_forward,
    predict_logistic_proba,
    svm_decision,
    train_logistic,
    train_nn,
    train_svm,
)
from .synthdata import synthetic_cohort
from .trees import (
    ForestConfig,
    GbtConfig,
    fit_gbt,
    fit_random_forest,
    predict_forest_vote_batch,
    predict_gbt_proba,
)

MODELS = ("logistic", "svm", "nn", "forest", "gbt")
MODES = ("centralized", "federated")
PARAMETRIC_MODELS = ("logistic", "svm", "nn")
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

_SAMPLING_BY_NAME = {s.value: s for s in SamplingStrategy}
_MODEL_CONFIGS = {
    "logistic": LogisticConfig,
    "svm": SvmConfig,
    "nn": NeuralNetConfig,
    "forest": ForestConfig,
    "gbt": GbtConfig,
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


def _derive(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    model: str
    mode: str
    dataset_path: str = "synthetic"
    n_clients: int = 3
    test_fraction: float = 0.2
    sampling: SamplingStrategy = SamplingStrategy.NONE
    rounds: int = 20
    subset_policy: SubsetPolicy | None = None
    p_top: int | None = None
    dp: DpConfig = DpConfig()
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    output_path: str | None = None
    schema: FeatureSchema = FRAMINGHAM_SCHEMA
    drop_columns: tuple[str, ...] = DEFAULT_DROP_COLUMNS
    on_missing: str = "impute"
    model_params: dict = field(default_factory=dict)
    weighted_average: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(
                f"config.model: expected one of {MODELS}, got {self.model!r}"
            )
        if self.mode not in MODES:
            raise ConfigError(
                f"config.mode: expected one of {MODES}, got {self.mode!r}"
            )
        if not isinstance(self.sampling, SamplingStrategy):
            raise ConfigError("config.sampling: expected a SamplingStrategy")
        if self.mode == "federated" and self.n_clients < 2:
            raise ConfigError("config.n_clients: federated mode requires at least 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("config.test_fraction: must lie in (0, 1)")
        if self.rounds < 1:
            raise ConfigError("config.rounds: must be at least 1")
        if self.subset_policy is not None and self.model != "forest":
            raise ConfigError(
                "config.subset_policy: only valid with model=forest, "
                f"got model={self.model!r}"
            )
        if self.p_top is not None:
            if self.model != "gbt":
                raise ConfigError(
                    "config.p_top: only valid with model=gbt, "
                    f"got model={self.model!r}"
                )
            if self.p_top < 1:
                raise ConfigError("config.p_top: must be at least 1")
        if (
            self.sampling == SamplingStrategy.FEDERATED_SMOTE
            and self.mode != "federated"
        ):
            raise ConfigError(
                "config.sampling: fed_smote needs global statistics and is "
                "only valid in federated mode"
            )
        if self.dp.enabled and self.model not in PARAMETRIC_MODELS:
            raise ConfigError(
                "config.dp: noise applies to parametric global models only"
            )
        if not self.seeds:
            raise ConfigError("config.seeds: at least one seed required")
        if any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError("config.seeds: seeds must be non-negative integers")
        if self.on_missing not in ("impute", "drop"):
            raise ConfigError("config.on_missing: expected 'impute' or 'drop'")

    def resolved(self) -> dict:
        """JSON-serializable echo that reconstructs this config exactly."""
        policy = None
        if self.subset_policy is not None:
            policy = {"kind": self.subset_policy.kind}
            if self.subset_policy.fraction is not None:
                policy["fraction"] = self.subset_policy.fraction
        out = {
            "model": self.model,
            "mode": self.mode,
            "dataset_path": self.dataset_path,
            "n_clients": self.n_clients,
            "test_fraction": self.test_fraction,
            "sampling": self.sampling.value,
            "rounds": self.rounds,
            "subset_policy": policy,
            "p_top": self.p_top,
            "dp": {
                "enabled": self.dp.enabled,
                "epsilon": self.dp.epsilon,
                "delta": self.dp.delta,
                "clip_norm": self.dp.clip_norm,
            },
            "seeds": list(self.seeds),
            "output_path": self.output_path,
            "on_missing": self.on_missing,
            "drop_columns": list(self.drop_columns),
            "model_params": dict(self.model_params),
            "weighted_average": self.weighted_average,
        }
        if self.schema is not FRAMINGHAM_SCHEMA:
            out["schema"] = {
                "names": list(self.schema.names),
                "kinds": list(self.schema.kinds),
                "label_name": self.schema.label_name,
            }
        return out


def _parse_subset_policy(value) -> SubsetPolicy:
    if isinstance(value, str):
        if value == "sqrt_k":
            return SubsetPolicy.sqrt_k()
        raise ConfigError(
            "config.subset_policy: string form must be 'sqrt_k'; use an "
            "object with kind='fraction' for fractional policies"
        )
    if isinstance(value, dict):
        kind = value.get("kind")
        if kind == "sqrt_k":
            if set(value) - {"kind"}:
                raise ConfigError("config.subset_policy: sqrt_k takes no fraction")
            return SubsetPolicy.sqrt_k()
        if kind == "fraction":
            if set(value) - {"kind", "fraction"}:
                raise ConfigError("config.subset_policy: unknown keys present")
            if "fraction" not in value:
                raise ConfigError("config.subset_policy: fraction value required")
            try:
                return SubsetPolicy.fraction_of(float(value["fraction"]))
            except ValueError as exc:
                raise ConfigError(f"config.subset_policy: {exc}") from None
        raise ConfigError(
            f"config.subset_policy.kind: expected 'sqrt_k' or 'fraction', got {kind!r}"
        )
    raise ConfigError("config.subset_policy: expected a string or an object")


def _parse_dp(value) -> DpConfig:
    if not isinstance(value, dict):
        raise ConfigError("config.dp: expected an object")
    allowed = {"enabled", "epsilon", "delta", "clip_norm"}
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"config.dp: unknown keys {sorted(unknown)}")
    try:
        return DpConfig(**value)
    except ValueError as exc:
        raise ConfigError(f"config.dp: {exc}") from None


def _parse_schema(value) -> FeatureSchema:
    if not isinstance(value, dict):
        raise ConfigError("config.schema: expected an object")
    allowed = {"names", "kinds", "label_name"}
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"config.schema: unknown keys {sorted(unknown)}")
    try:
        return FeatureSchema(
            names=tuple(value["names"]),
            kinds=tuple(value["kinds"]),
            label_name=str(value.get("label_name", "label")),
        )
    except KeyError as exc:
        raise ConfigError(f"config.schema: missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"config.schema: {exc}") from None


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config, naming the offending field on errors.

    FEDCHD_DATASET and FEDCHD_OUTPUT environment variables override
    dataset_path and output_path here, so the report echo shows the
    effective values.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"config: unknown fields {sorted(unknown)}")
    values = dict(raw)
    if "model" not in values or "mode" not in values:
        raise ConfigError("config: 'model' and 'mode' are required")
    if "sampling" in values:
        name = values["sampling"]
        if name not in _SAMPLING_BY_NAME:
            raise ConfigError(
                f"config.sampling: expected one of {sorted(_SAMPLING_BY_NAME)}, "
                f"got {name!r}"
            )
        values["sampling"] = _SAMPLING_BY_NAME[name]
    if values.get("subset_policy") is not None:
        values["subset_policy"] = _parse_subset_policy(values["subset_policy"])
    if "dp" in values:
        values["dp"] = _parse_dp(values["dp"])
    if "schema" in values:
        values["schema"] = _parse_schema(values["schema"])
    if "seeds" in values:
        seeds = values["seeds"]
        if not isinstance(seeds, (list, tuple)):
            raise ConfigError("config.seeds: expected a list of integers")
        values["seeds"] = tuple(seeds)
    if "drop_columns" in values:
        values["drop_columns"] = tuple(values["drop_columns"])
    if "model_params" in values and not isinstance(values["model_params"], dict):
        raise ConfigError("config.model_params: expected an object")
    env_dataset = os.environ.get("FEDCHD_DATASET")
    if env_dataset:
        values["dataset_path"] = env_dataset
    env_output = os.environ.get("FEDCHD_OUTPUT")
    if env_output:
        values["output_path"] = env_output
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON ({exc})") from None
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# Dataset resolution
# ---------------------------------------------------------------------------

def load_dataset(config: ExperimentConfig) -> DataTable:
    path = config.dataset_path
    if path == "synthetic" or path.startswith("synthetic:"):
        parts = path.split(":")
        try:
            gen_seed = int(parts[1]) if len(parts) > 1 else 0
            n_rows = int(parts[2]) if len(parts) > 2 else 4238
        except ValueError:
            raise ConfigError(
                "config.dataset_path: synthetic form is 'synthetic[:SEED[:ROWS]]'"
            ) from None
        return synthetic_cohort(n_rows=n_rows, seed=gen_seed, schema=config.schema)
    return load_csv(
        path,
        schema=config.schema,
        drop_columns=config.drop_columns,
        on_missing=config.on_missing,
    )


# ---------------------------------------------------------------------------
# Cell execution
# ---------------------------------------------------------------------------

def _build_model_config(config: ExperimentConfig):
    base = _MODEL_CONFIGS[config.model]()
    if not config.model_params:
        return base
    try:
        return replace(base, **config.model_params)
    except TypeError as exc:
        raise ConfigError(f"config.model_params: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"config.model_params: {exc}") from None


def _run_centralized(train: DataTable, test: DataTable,
                     config: ExperimentConfig, seed: int) -> np.ndarray:
    resampled = apply_sampling(train, config.sampling, _derive(seed, 101))
    model_config = _build_model_config(config)
    if config.model in PARAMETRIC_MODELS:
        scaler = fit_feature_scaler(resampled)
        std = DataTable(resampled.schema, scaler.transform(resampled.X), resampled.y)
        X_test = scaler.transform(test.X)
        if config.model == "logistic":
            params = train_logistic(std, model_config)
            return (predict_logistic_proba(params, X_test) >= 0.5).astype(np.int64)
        if config.model == "svm":
            params = train_svm(std, model_config)
            return (svm_decision(params, X_test, model_config.degree) >= 0.0).astype(np.int64)
        init = init_nn_params(std.n_features, model_config.hidden_units,
                              model_config.seed)
        params = train_nn(std, model_config, init)
        return (nn_forward(params, X_test) >= 0.5).astype(np.int64)
    if config.model == "forest":
        forest = fit_random_forest(resampled, model_config)
        return predict_forest_vote_batch(forest, test.X)
    ensemble = fit_gbt(resampled, model_config)
    return (predict_gbt_proba(ensemble, test.X) >= 0.5).astype(np.int64)


def _run_federated(train: DataTable, test: DataTable, config: ExperimentConfig,
                   seed: int, ledger: CommLedger, timings: dict) -> np.ndarray:
    clients = make_clients(partition_clients(train, config.n_clients, seed))
    model_config = _build_model_config(config)
    if config.model in PARAMETRIC_MODELS:
        model = run_parametric_federation(
            clients,
            config.model,
            rounds=config.rounds,
            local_config=model_config,
            sampling=config.sampling,
            dp=config.dp,
            ledger=ledger,
            seed=seed,
            weighted_average=config.weighted_average,
            timings=timings,
        )
    elif config.model == "forest":
        model = run_forest_federation(
            clients,
            forest_config=model_config,
            policy=config.subset_policy or SubsetPolicy.sqrt_k(),
            sampling=config.sampling,
            ledger=ledger,
            seed=seed,
            timings=timings,
        )
    else:
        model = run_xgb_feature_extraction(
            clients,
            gbt_config=model_config,
            p=config.p_top if config.p_top is not None else 8,
            sampling=config.sampling,
            ledger=ledger,
            seed=seed,
            timings=timings,
        )
    return model.predict(test.X)


def _execute_cell(table: DataTable, config: ExperimentConfig,
                  seed: int) -> tuple[dict, dict]:
    """One (config, seed) run. Returns (record, timing sidecar entry)."""
    train, test = stratified_split(table, config.test_fraction, seed)
    ledger = CommLedger()
    timings: dict = {}
    started = time.perf_counter()
    if config.mode == "centralized":
        predictions = _run_centralized(train, test, config, seed)
    else:
        predictions = _run_federated(train, test, config, seed, ledger, timings)
    timings["train_seconds"] = time.perf_counter() - started

    started = time.perf_counter()
    report = evaluate(predictions, test.y)
    timings["eval_seconds"] = time.perf_counter() - started

    record = {
        "model": config.model,
        "mode": config.mode,
        "sampling": config.sampling.value,
        "seed": seed,
        "metrics": report.as_dict(),
        "bytes_up": ledger.up_bytes(),
        "bytes_down": ledger.down_bytes(),
        "ledger_references": ledger.references,
    }
    return record, timings


def _error_record(config: ExperimentConfig, seed: int, error: Exception) -> dict:
    return {
        "model": config.model,
        "mode": config.mode,
        "sampling": config.sampling.value,
        "seed": seed,
        "error": f"{type(error).__name__}: {error}",
    }


def _summarize(records: "list[dict]") -> "list[dict]":
    """One summary row per (model, mode, sampling) cell, averaged over the
    seeds that succeeded."""
    cells: dict[tuple, list[dict]] = {}
    for record in records:
        cells.setdefault(
            (record["model"], record["mode"], record["sampling"]), []
        ).append(record)
    summary = []
    for (model, mode, sampling), group in sorted(cells.items()):
        ok = [r for r in group if "error" not in r]
        row = {
            "model": model,
            "mode": mode,
            "sampling": sampling,
            "n_seeds": len(group),
            "n_failed": len(group) - len(ok),
        }
        if ok:
            for name in ("f1", "precision", "recall", "accuracy"):
                row[name] = float(np.mean([r["metrics"][name] for r in ok]))
            row["comm_bytes"] = float(
                np.mean([r["bytes_up"] + r["bytes_down"] for r in ok])
            )
            row["f1_per_seed"] = {str(r["seed"]): r["metrics"]["f1"] for r in ok}
        summary.append(row)
    return summary


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """Deterministic payload plus a timing sidecar.

    The payload serializes to identical bytes for identical configs; the
    sidecar holds wall-clock measurements and is excluded from determinism
    comparisons.
    """

    payload: dict
    sidecar: dict

    def payload_json(self) -> str:
        return json.dumps(self.payload, indent=2, sort_keys=True) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"payload": self.payload, "sidecar": self.sidecar},
            indent=2,
            sort_keys=True,
        ) + "\n"

    def summary_rows(self) -> "list[dict]":
        return list(self.payload.get("summary", []))


_CSV_COLUMNS = ("model", "mode", "sampling", "f1", "precision", "recall",
                "comm_bytes")


def write_report(report: ExperimentReport, output_path) -> "list[Path]":
    """Write the JSON report, plus a flat CSV beside it when the report
    carries a summary table. Returns the written paths."""
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json(), encoding="utf-8")
    written = [path]
    rows = report.summary_rows()
    if rows:
        csv_path = path.with_suffix(".csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(_CSV_COLUMNS)
            for row in rows:
                writer.writerow(
                    ["" if row.get(c) is None else row.get(c) for c in _CSV_COLUMNS]
                )
        written.append(csv_path)
    return written


def _dataset_fingerprint(table: DataTable) -> dict:
    return {"rows": len(table), "positive_rate": table.positive_rate()}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run(config: ExperimentConfig) -> ExperimentReport:
    """Execute one experiment cell once per seed and write the report when
    the config names an output path."""
    table = load_dataset(config)
    records = []
    timing_entries = []
    for seed in config.seeds:
        record, timings = _execute_cell(table, config, seed)
        records.append(record)
        timing_entries.append({"seed": seed, **timings})
    payload = {
        "kind": "run",
        "config": config.resolved(),
        "dataset": _dataset_fingerprint(table),
        "records": records,
        "summary": _summarize(records),
    }
    report = ExperimentReport(payload=payload, sidecar={"timings": timing_entries})
    if config.output_path:
        write_report(report, config.output_path)
    return report


def _finite_or_str(value: float):
    if math.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


def compare(config_a: ExperimentConfig, config_b: ExperimentConfig) -> ExperimentReport:
    """Run both configs on the same data and seeds, pair the per-seed
    metrics, and test the F1 difference (b minus a) for significance."""
    if config_a.dataset_path != config_b.dataset_path:
        raise ConfigError(
            "compare: configs must share dataset_path, got "
            f"{config_a.dataset_path!r} and {config_b.dataset_path!r}"
        )
    if config_a.seeds != config_b.seeds:
        raise ConfigError("compare: configs must share the same seed list")
    report_a = run(replace(config_a, output_path=None))
    report_b = run(replace(config_b, output_path=None))

    per_seed = []
    f1_a, f1_b = [], []
    for rec_a, rec_b in zip(report_a.payload["records"], report_b.payload["records"]):
        entry = {"seed": rec_a["seed"]}
        entry["metrics_a"] = rec_a["metrics"]
        entry["metrics_b"] = rec_b["metrics"]
        entry["delta"] = {
            name: rec_b["metrics"][name] - rec_a["metrics"][name]
            for name in ("f1", "precision", "recall", "accuracy")
        }
        per_seed.append(entry)
        f1_a.append(rec_a["metrics"]["f1"])
        f1_b.append(rec_b["metrics"]["f1"])

    delta_mean = float(np.mean(f1_b) - np.mean(f1_a))
    verdict = None
    if len(f1_a) >= 2:
        t = paired_t_test(f1_b, f1_a)
        verdict = {
            "t_statistic": _finite_or_str(t.t_statistic),
            "degrees_of_freedom": t.degrees_of_freedom,
            "significant_at_0_05": t.significant_at_0_05,
        }
    payload = {
        "kind": "compare",
        "config_a": config_a.resolved(),
        "config_b": config_b.resolved(),
        "dataset": report_a.payload["dataset"],
        "per_seed": per_seed,
        "summary_a": report_a.payload["summary"],
        "summary_b": report_b.payload["summary"],
        "delta_f1_mean": delta_mean,
        # Convenience flag for subset-vs-full comparisons: whether the mean
        # F1 delta stays within 0.03. Informational, never asserted.
        "delta_f1_within_0_03": abs(delta_mean) <= 0.03,
        "t_test": verdict,
    }
    sidecar = {
        "timings_a": report_a.sidecar["timings"],
        "timings_b": report_b.sidecar["timings"],
    }
    return ExperimentReport(payload=payload, sidecar=sidecar)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

_SWEEP_ONLY_FIELDS = {"grid", "tree_series_sampling"}


def sweep_from_dict(raw: dict) -> tuple[list, dict]:
    """Expand a sweep document into cell configs plus sweep-level options.

    The document is a regular config without 'model'/'mode', plus a 'grid'
    object: {"models": [...], "modes": [...], "samplings": [...]}. An
    optional 'tree_series_sampling' requests the three-strategy
    communication series built with that sampling. Cells whose combination
    is invalid (e.g. fed_smote in centralized mode) come back as error
    markers so the sweep can flag rather than abort them.
    """
    if not isinstance(raw, dict):
        raise ConfigError("sweep config: expected a JSON object")
    grid = raw.get("grid")
    if grid is None:
        raise ConfigError("sweep config: 'grid' object required")
    unknown = set(grid) - {"models", "modes", "samplings"}
    if unknown:
        raise ConfigError(f"sweep config.grid: unknown keys {sorted(unknown)}")
    models = list(grid.get("models", []))
    modes = list(grid.get("modes", ["federated"]))
    samplings = list(grid.get("samplings", ["none"]))
    base = {k: v for k, v in raw.items() if k not in _SWEEP_ONLY_FIELDS}
    base.pop("model", None)
    base.pop("mode", None)
    base.pop("sampling", None)
    subset_policy = base.pop("subset_policy", None)
    p_top = base.pop("p_top", None)
    seeds = tuple(base.get("seeds", DEFAULT_SEEDS))

    cells: list = []
    for model, mode, sampling in product(models, modes, samplings):
        cell = dict(base)
        cell["model"] = model
        cell["mode"] = mode
        cell["sampling"] = sampling
        if model == "forest" and subset_policy is not None:
            cell["subset_policy"] = subset_policy
        if model == "gbt" and p_top is not None:
            cell["p_top"] = p_top
        try:
            cells.append(config_from_dict(cell))
        except ConfigError as exc:
            cells.append(
                {
                    "model": model,
                    "mode": mode,
                    "sampling": sampling,
                    "seeds": seeds,
                    "error": str(exc),
                }
            )

    options = {"tree_series_sampling": raw.get("tree_series_sampling")}
    options["output_path"] = (
        os.environ.get("FEDCHD_OUTPUT") or raw.get("output_path")
    )
    return cells, options


def _tree_series(base: ExperimentConfig, sampling_name: str) -> "list[dict]":
    """(comm bytes, F1) for the three tree federation strategies: the full
    forest upload, the sqrt-k subset, and GBT feature extraction."""
    if sampling_name not in _SAMPLING_BY_NAME:
        raise ConfigError(
            f"sweep config.tree_series_sampling: unknown sampling {sampling_name!r}"
        )
    strategies = [
        ("forest_full", "forest", SubsetPolicy.fraction_of(1.0), None),
        ("forest_sqrt_k", "forest", SubsetPolicy.sqrt_k(), None),
        ("gbt_feature_extraction", "gbt", None, 8),
    ]
    series = []
    for label, model, policy, p_top in strategies:
        config = replace(
            base,
            model=model,
            mode="federated",
            sampling=_SAMPLING_BY_NAME[sampling_name],
            subset_policy=policy,
            p_top=p_top,
            output_path=None,
            # The series compares the canonical strategies, so cell-specific
            # model parameters and parametric-only DP noise don't carry over.
            model_params={},
            dp=DpConfig(),
        )
        report = run(config)
        row = report.payload["summary"][0]
        series.append(
            {"strategy": label, "comm_bytes": row["comm_bytes"], "f1": row["f1"]}
        )
    return series


def sweep(raw_config: dict) -> ExperimentReport:
    """Run every grid cell per seed; cell failures become flagged records
    instead of aborting the sweep."""
    cells, options = sweep_from_dict(raw_config)
    records: list[dict] = []
    timing_entries: list[dict] = []
    table = None
    table_key = None
    valid = [c for c in cells if isinstance(c, ExperimentConfig)]
    for config in cells:
        if isinstance(config, dict):  # invalid combination, flag every seed
            for seed in config["seeds"]:
                records.append(
                    {
                        "model": config["model"],
                        "mode": config["mode"],
                        "sampling": config["sampling"],
                        "seed": seed,
                        "error": config["error"],
                    }
                )
            continue
        if table is None or table_key != config.dataset_path:
            table = load_dataset(config)
            table_key = config.dataset_path
        for seed in config.seeds:
            try:
                record, timings = _execute_cell(table, config, seed)
                records.append(record)
                timing_entries.append(
                    {
                        "model": config.model,
                        "mode": config.mode,
                        "sampling": config.sampling.value,
                        "seed": seed,
                        **timings,
                    }
                )
            except Exception as exc:  # keep sweeping, flag the cell
                records.append(_error_record(config, seed, exc))
    payload = {
        "kind": "sweep",
        "cells": [
            c.resolved() if isinstance(c, ExperimentConfig) else dict(c)
            for c in cells
        ],
        "dataset": _dataset_fingerprint(table) if table is not None else None,
        "records": records,
        "summary": _summarize(records),
    }
    if options["tree_series_sampling"] is not None and valid:
        payload["tree_series"] = _tree_series(
            valid[0], options["tree_series_sampling"]
        )
    report = ExperimentReport(payload=payload, sidecar={"timings": timing_entries})
    if options["output_path"]:
        write_report(report, options["output_path"])
    return report
