"""Tabular dataset handling for the federation simulator.

Covers CSV ingestion with imputation, stratified train/test splitting,
stratified partitioning across simulated institutions, and the local
class-rebalancing strategies (random over/undersampling and SMOTE-style
interpolation). All operations are pure functions of (inputs, seed).
"""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

CONTINUOUS = "continuous"
BINARY = "binary"
_VALID_KINDS = (CONTINUOUS, BINARY)


class DatasetError(ValueError):
    """Malformed input file or a table violating an operation's preconditions."""


class SamplingStrategy(enum.Enum):
    """Class-rebalancing strategy applied to a training table."""

    NONE = "none"
    ROS = "ros"
    RUS = "rus"
    LOCAL_SMOTE = "smote"
    # Needs globally synchronized minority statistics; only meaningful inside
    # a federation run (see fedchd.federation.federated_smote_sync).
    FEDERATED_SMOTE = "fed_smote"


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names and kinds plus the binary target column name."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]
    label_name: str

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if len(self.names) != len(self.kinds):
            raise DatasetError("schema: names and kinds must have equal length")
        if len(set(self.names)) != len(self.names):
            raise DatasetError("schema: duplicate feature name")
        for kind in self.kinds:
            if kind not in _VALID_KINDS:
                raise DatasetError(f"schema: unknown feature kind {kind!r}")
        if self.label_name in self.names:
            raise DatasetError("schema: label column listed among features")

    @property
    def n_features(self) -> int:
        return len(self.names)

    def binary_mask(self) -> np.ndarray:
        """Boolean mask over feature columns, True where the kind is binary."""
        return np.array([k == BINARY for k in self.kinds], dtype=bool)


# Default schema for the public Framingham cohort export: 14 predictors and
# the 10-year CHD label. Column spellings match the widely mirrored CSV.
FRAMINGHAM_SCHEMA = FeatureSchema(
    names=(
        "male", "age", "currentSmoker", "cigsPerDay", "BPMeds",
        "prevalentStroke", "prevalentHyp", "diabetes", "totChol",
        "sysBP", "diaBP", "BMI", "heartRate", "glucose",
    ),
    kinds=(
        BINARY, CONTINUOUS, BINARY, CONTINUOUS, BINARY,
        BINARY, BINARY, BINARY, CONTINUOUS,
        CONTINUOUS, CONTINUOUS, CONTINUOUS, CONTINUOUS, CONTINUOUS,
    ),
    label_name="TenYearCHD",
)

# Alternate header spellings seen in public mirrors of the cohort, keyed by
# normalized (lowercase, separator-free) form.
FRAMINGHAM_ALIASES = {
    "sex": "male",
    "gender": "male",
    "issmoking": "currentSmoker",
    "totalcholesterol": "totChol",
    "systolicbp": "sysBP",
    "diastolicbp": "diaBP",
    "tenyearchdrisk": "TenYearCHD",
    "10yearchdrisk": "TenYearCHD",
    "chd": "TenYearCHD",
}

# The public export carries a non-clinical "education" column that the
# default schema excludes.
DEFAULT_DROP_COLUMNS = ("education",)

DEFAULT_MISSING_MARKERS = ("", "NA", "NaN", "nan")


def _normalize_column(name: str) -> str:
    return re.sub(r"[\s_\-]+", "", name).strip().lower()


@dataclass(frozen=True, eq=False)
class DataTable:
    """Immutable feature matrix plus binary labels tied to a schema."""

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise DatasetError("table: X must be 2-dimensional")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DatasetError("table: rows and labels must have equal length")
        if X.shape[1] != self.schema.n_features:
            raise DatasetError(
                f"table: {X.shape[1]} columns but schema has "
                f"{self.schema.n_features} features"
            )
        if not np.isfinite(X).all():
            raise DatasetError("table: non-finite feature value")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DatasetError("table: labels must be 0 or 1")
        bmask = self.schema.binary_mask()
        if bmask.any() and X.shape[0]:
            bcols = X[:, bmask]
            if not np.isin(bcols, (0.0, 1.0)).all():
                raise DatasetError("table: binary feature holds a value outside {0, 1}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.schema.n_features

    def class_counts(self) -> tuple[int, int]:
        """(negative count, positive count)."""
        pos = int(self.y.sum())
        return len(self) - pos, pos

    def positive_rate(self) -> float:
        return float(self.y.mean()) if len(self) else 0.0

    def minority_label(self) -> int:
        """The rarer class; ties resolve to 1 (the clinically costly class)."""
        n_neg, n_pos = self.class_counts()
        return 1 if n_pos <= n_neg else 0

    def take(self, indices) -> "DataTable":
        idx = np.asarray(indices, dtype=np.intp)
        return DataTable(self.schema, self.X[idx], self.y[idx])

    def append_rows(self, X_new: np.ndarray, y_new: np.ndarray) -> "DataTable":
        X_new = np.asarray(X_new, dtype=np.float64).reshape(-1, self.n_features)
        y_new = np.asarray(y_new, dtype=np.int64).ravel()
        return DataTable(
            self.schema,
            np.vstack([self.X, X_new]),
            np.concatenate([self.y, y_new]),
        )

    def equals(self, other: "DataTable") -> bool:
        return (
            self.schema == other.schema
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _require_both_classes(table: DataTable, op: str) -> None:
    n_neg, n_pos = table.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise DatasetError(f"{op}: table must contain both classes")


def load_csv(
    path,
    schema: FeatureSchema = FRAMINGHAM_SCHEMA,
    *,
    aliases: dict[str, str] | None = None,
    drop_columns: tuple[str, ...] = DEFAULT_DROP_COLUMNS,
    missing_markers: tuple[str, ...] = DEFAULT_MISSING_MARKERS,
    on_missing: str = "impute",
) -> DataTable:
    """Load a CSV file into a DataTable.

    Column headers are matched to schema names case-insensitively, ignoring
    spaces, underscores and dashes, after applying the alias map. Missing
    cells (per ``missing_markers``) are imputed column-wise: median for
    continuous features, mode for binary ones. With ``on_missing="drop"``
    incomplete rows are removed instead.

    Raises DatasetError for unknown columns, non-numeric cells that are not a
    missing marker, labels outside {0, 1}, or a missing label cell (the
    target cannot be imputed).
    """
    if on_missing not in ("impute", "drop"):
        raise DatasetError(f"on_missing must be 'impute' or 'drop', got {on_missing!r}")
    if aliases is None:
        aliases = FRAMINGHAM_ALIASES
    path = Path(path)

    norm_aliases = {_normalize_column(k): v for k, v in aliases.items()}
    norm_to_schema = {_normalize_column(n): n for n in schema.names}
    norm_to_schema[_normalize_column(schema.label_name)] = schema.label_name
    norm_drop = {_normalize_column(c) for c in drop_columns}

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None

        # Map each CSV column position to a schema column (or None = dropped).
        col_targets: list[str | None] = []
        seen: set[str] = set()
        for raw in header:
            norm = _normalize_column(raw)
            if norm in norm_aliases:
                norm = _normalize_column(norm_aliases[norm])
            if norm in norm_drop and norm not in norm_to_schema:
                col_targets.append(None)
                continue
            target = norm_to_schema.get(norm)
            if target is None:
                raise DatasetError(f"{path}: unknown column {raw!r}")
            if target in seen:
                raise DatasetError(f"{path}: duplicate column {raw!r}")
            seen.add(target)
            col_targets.append(target)
        missing = [n for n in (*schema.names, schema.label_name) if n not in seen]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")

        feature_pos = {name: i for i, name in enumerate(schema.names)}
        markers = set(missing_markers)
        rows: list[np.ndarray] = []
        labels: list[float] = []
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(col_targets):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(col_targets)} cells, "
                    f"got {len(record)}"
                )
            row = np.full(schema.n_features, np.nan)
            label = None
            for cell, target in zip(record, col_targets):
                if target is None:
                    continue
                text = cell.strip()
                if text in markers:
                    if target == schema.label_name:
                        raise DatasetError(
                            f"{path}:{lineno}: missing label cell cannot be imputed"
                        )
                    continue
                try:
                    value = float(text)
                except ValueError:
                    raise DatasetError(
                        f"{path}:{lineno}: non-numeric cell {cell!r} in "
                        f"column {target!r}"
                    ) from None
                if target == schema.label_name:
                    label = value
                else:
                    row[feature_pos[target]] = value
            if label not in (0.0, 1.0):
                raise DatasetError(
                    f"{path}:{lineno}: label value {label!r} outside {{0, 1}}"
                )
            rows.append(row)
            labels.append(label)

    if not rows:
        raise DatasetError(f"{path}: no data rows")
    X = np.vstack(rows)
    y = np.asarray(labels)

    if on_missing == "drop":
        keep = ~np.isnan(X).any(axis=1)
        X, y = X[keep], y[keep]
        if not len(X):
            raise DatasetError(f"{path}: every row has missing cells")
    else:
        X = _impute(X, schema, path)

    return DataTable(schema, X, y.astype(np.int64))


def _impute(X: np.ndarray, schema: FeatureSchema, path) -> np.ndarray:
    X = X.copy()
    for j, kind in enumerate(schema.kinds):
        col = X[:, j]
        nan = np.isnan(col)
        if not nan.any():
            continue
        observed = col[~nan]
        if observed.size == 0:
            raise DatasetError(f"{path}: column {schema.names[j]!r} entirely missing")
        if kind == BINARY:
            ones = int((observed == 1.0).sum())
            fill = 1.0 if ones > observed.size - ones else 0.0
        else:
            fill = float(np.median(observed))
        col[nan] = fill
    return X


def stratified_split(
    table: DataTable, test_fraction: float, seed: int
) -> tuple[DataTable, DataTable]:
    """Split into (train, test) preserving the class ratio.

    The test set holds round(test_fraction * n) rows, with per-class counts
    allocated by largest remainder so each class's proportion is within one
    sample of the overall proportion. Deterministic given the seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError("stratified_split: test_fraction must lie in (0, 1)")
    _require_both_classes(table, "stratified_split")

    n = len(table)
    n_test = _round_half_up(test_fraction * n)
    rng = np.random.default_rng(seed)

    class_indices = [np.flatnonzero(table.y == c) for c in (0, 1)]
    exact = [test_fraction * len(idx) for idx in class_indices]
    quotas = [int(math.floor(e)) for e in exact]
    remainders = [e - q for e, q in zip(exact, quotas)]
    # Hand out the leftover slots to the classes with the largest remainders.
    for c in sorted(range(2), key=lambda c: (-remainders[c], c)):
        if sum(quotas) >= n_test:
            break
        quotas[c] += 1

    test_idx: list[np.ndarray] = []
    train_idx: list[np.ndarray] = []
    for idx, quota in zip(class_indices, quotas):
        shuffled = rng.permutation(idx)
        test_idx.append(shuffled[:quota])
        train_idx.append(shuffled[quota:])
    test = table.take(np.sort(np.concatenate(test_idx)))
    train = table.take(np.sort(np.concatenate(train_idx)))
    return train, test


def partition_clients(
    train: DataTable, n_clients: int, seed: int
) -> list[DataTable]:
    """Partition a training table into stratified, near-equal client shares.

    Per class, rows are shuffled and dealt into n_clients chunks. Remainder
    rows go to clients in index order, continuing across classes, so no
    client collects two extras before every client has one; partition sizes
    therefore differ by at most one row.
    """
    if n_clients < 2:
        raise DatasetError("partition_clients: n_clients must be at least 2")
    _require_both_classes(train, "partition_clients")
    n_neg, n_pos = train.class_counts()
    if min(n_neg, n_pos) < n_clients:
        raise DatasetError(
            "partition_clients: each class needs at least n_clients rows"
        )

    rng = np.random.default_rng(seed)
    shares: list[list[np.ndarray]] = [[] for _ in range(n_clients)]
    extra_cursor = 0
    for c in (0, 1):
        idx = rng.permutation(np.flatnonzero(train.y == c))
        base, rem = divmod(len(idx), n_clients)
        extra_clients = {(extra_cursor + j) % n_clients for j in range(rem)}
        pos = 0
        for i in range(n_clients):
            size = base + (1 if i in extra_clients else 0)
            shares[i].append(idx[pos:pos + size])
            pos += size
        extra_cursor += rem
    return [
        train.take(np.sort(np.concatenate(parts))) for parts in shares
    ]


def apply_ros(table: DataTable, seed: int) -> DataTable:
    """Random oversampling: duplicate minority rows until classes balance."""
    _require_both_classes(table, "apply_ros")
    n_neg, n_pos = table.class_counts()
    if n_neg == n_pos:
        return table
    minority = table.minority_label()
    need = abs(n_neg - n_pos)
    min_idx = np.flatnonzero(table.y == minority)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(min_idx, size=need, replace=True)
    return table.append_rows(table.X[chosen], table.y[chosen])


def apply_rus(table: DataTable, seed: int) -> DataTable:
    """Random undersampling: keep a without-replacement majority subset."""
    _require_both_classes(table, "apply_rus")
    n_neg, n_pos = table.class_counts()
    if n_neg == n_pos:
        return table
    minority = table.minority_label()
    min_idx = np.flatnonzero(table.y == minority)
    maj_idx = np.flatnonzero(table.y != minority)
    rng = np.random.default_rng(seed)
    kept = rng.choice(maj_idx, size=len(min_idx), replace=False)
    return table.take(np.sort(np.concatenate([min_idx, kept])))


def _minority_neighbor_lists(X_min: np.ndarray, X_all: np.ndarray, k: int) -> list[np.ndarray]:
    """k nearest minority neighbors per minority row, by standardized distance.

    Distances use z-scores computed from the table being resampled; the
    resulting neighbor indices refer to rows of X_min. Ties break by index.
    """
    mu = X_all.mean(axis=0)
    sd = X_all.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)
    Z = (X_min - mu) / sd
    dist = cdist(Z, Z)
    out = []
    for i in range(len(X_min)):
        order = np.argsort(dist[i], kind="stable")
        order = order[order != i]
        out.append(order[:k])
    return out


def apply_local_smote(table: DataTable, k_neighbors: int = 5, seed: int = 0) -> DataTable:
    """Balance classes with SMOTE-style interpolation between minority rows.

    Each synthetic row is x + u * (nn - x) for a random minority row x, one
    of its k nearest minority neighbors nn, and u uniform in [0, 1]. Binary
    features are rounded back to {0, 1}. The effective neighbor count is
    min(k_neighbors, minority - 1).
    """
    if k_neighbors < 1:
        raise DatasetError("apply_local_smote: k_neighbors must be at least 1")
    _require_both_classes(table, "apply_local_smote")
    n_neg, n_pos = table.class_counts()
    if n_neg == n_pos:
        return table
    minority = table.minority_label()
    min_idx = np.flatnonzero(table.y == minority)
    if len(min_idx) < 2:
        raise DatasetError("apply_local_smote: need at least 2 minority rows")

    X_min = table.X[min_idx]
    k_eff = min(k_neighbors, len(min_idx) - 1)
    neighbors = _minority_neighbor_lists(X_min, table.X, k_eff)

    rng = np.random.default_rng(seed)
    need = abs(n_neg - n_pos)
    bmask = table.schema.binary_mask()
    synth = np.empty((need, table.n_features))
    for t in range(need):
        i = int(rng.integers(0, len(X_min)))
        nn = int(neighbors[i][int(rng.integers(0, k_eff))])
        u = rng.random()
        row = X_min[i] + u * (X_min[nn] - X_min[i])
        row[bmask] = np.where(row[bmask] >= 0.5, 1.0, 0.0)
        synth[t] = row
    return table.append_rows(synth, np.full(need, minority))


@dataclass(frozen=True)
class ClassStats:
    """Per-feature minority-class moments a client may share with the server."""

    mu: np.ndarray
    sigma2: np.ndarray
    n_minority: int
    n_majority: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        if mu.shape != sigma2.shape or mu.ndim != 1:
            raise DatasetError("class stats: mu and sigma2 must be equal-length vectors")
        if (sigma2 < 0.0).any():
            raise DatasetError("class stats: negative variance")
        mu.setflags(write=False)
        sigma2.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)


def minority_class_stats(table: DataTable) -> ClassStats:
    """Mean and population variance (divide by n) of minority-class rows."""
    minority = table.minority_label()
    mask = table.y == minority
    if not mask.any():
        raise DatasetError("minority_class_stats: empty minority class")
    X_min = table.X[mask]
    return ClassStats(
        mu=X_min.mean(axis=0),
        sigma2=X_min.var(axis=0),
        n_minority=int(mask.sum()),
        n_majority=int(len(table) - mask.sum()),
    )


def apply_sampling(
    table: DataTable,
    strategy: SamplingStrategy,
    seed: int,
    k_neighbors: int = 5,
) -> DataTable:
    """Dispatch the purely local strategies; FEDERATED_SMOTE is rejected here."""
    if strategy == SamplingStrategy.NONE:
        return table
    if strategy == SamplingStrategy.ROS:
        return apply_ros(table, seed)
    if strategy == SamplingStrategy.RUS:
        return apply_rus(table, seed)
    if strategy == SamplingStrategy.LOCAL_SMOTE:
        return apply_local_smote(table, k_neighbors, seed)
    raise DatasetError(
        f"{strategy.value}: requires a federation run with synchronized statistics"
    )
