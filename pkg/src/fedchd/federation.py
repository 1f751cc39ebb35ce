"""Simulated multi-client training rounds with byte-exact accounting.

Every payload that crosses the client-server boundary passes through an
in-process Channel that frames it in the canonical wire format and logs the
body size in a CommLedger, so reported byte counts are real serialized
sizes, not estimates. Parametric models federate by unweighted parameter
averaging over one or more rounds; tree models federate in a single round
by uploading either a sampled subset of a local forest or one shallow tree
distilled from a local boosted ensemble.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import wire
from .data import (
    ClassStats,
    DataTable,
    SamplingStrategy,
    apply_sampling,
    minority_class_stats,
)
from .parametric import (
    LogisticConfig,
    NeuralNetConfig,
    ParamVector,
    Standardizer,
    SvmConfig,
    init_nn_params,
    nn_forward,
    predict_logistic_proba,
    svm_decision,
    train_logistic,
    train_nn,
    train_svm,
    zeros_logistic,
    zeros_svm,
)
from .trees import (
    FOREST_VOTE,
    WEIGHTED_VOTE,
    ForestConfig,
    GbtConfig,
    TreeEnsemble,
    fit_gbt,
    fit_random_forest,
    fit_top_p_tree,
    gbt_feature_importance,
    predict_forest_vote_batch,
    tree_apply,
)
from .wire import ledger_bytes  # re-exported: the ledger's sizing rule

__all__ = [
    "AveragedParams",
    "Channel",
    "ClientHandle",
    "CommLedger",
    "DpConfig",
    "FederationError",
    "ForestUnion",
    "GlobalModel",
    "LedgerEntry",
    "SubsetPolicy",
    "WeightedShallowTrees",
    "aggregate_minority_stats",
    "dp_gaussianize",
    "fedavg_aggregate",
    "federated_smote_sync",
    "fit_feature_scaler",
    "ledger_bytes",
    "make_clients",
    "run_forest_federation",
    "run_parametric_federation",
    "run_xgb_feature_extraction",
    "tree_subset_select",
]


class FederationError(ValueError):
    pass


# Seed-derivation salts so the independent random streams of one run
# (resampling, forests, subset draws, synthetic rows, noise) never collide.
_SALT_SAMPLING = 1
_SALT_FOREST = 2
_SALT_SUBSET = 3
_SALT_SMOTE = 4
_SALT_DP = 5


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _accumulate(timings: dict | None, key: str, seconds: float) -> None:
    if timings is not None:
        timings[key] = timings.get(key, 0.0) + seconds


# ---------------------------------------------------------------------------
# Participants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClientHandle:
    """One simulated hospital: an id, its private table, and its share of
    the total row count."""

    id: int
    data: DataTable
    size_weight: float


def make_clients(tables) -> tuple[ClientHandle, ...]:
    tables = tuple(tables)
    if not tables:
        raise FederationError("make_clients: at least one table required")
    total = sum(len(t) for t in tables)
    return tuple(
        ClientHandle(id=i, data=t, size_weight=len(t) / total)
        for i, t in enumerate(tables)
    )


def _check_clients(clients, minimum: int = 2) -> tuple[ClientHandle, ...]:
    clients = tuple(clients)
    if len(clients) < minimum:
        raise FederationError(f"federation requires at least {minimum} clients")
    if len({c.id for c in clients}) != len(clients):
        raise FederationError("client ids must be unique")
    if len({c.data.n_features for c in clients}) != 1:
        raise FederationError("clients must share one feature space")
    if not math.isclose(sum(c.size_weight for c in clients), 1.0, abs_tol=1e-9):
        raise FederationError("client size weights must sum to 1")
    return clients


# ---------------------------------------------------------------------------
# Subset policy
# ---------------------------------------------------------------------------

SQRT_K = "sqrt_k"
FRACTION = "fraction"


@dataclass(frozen=True)
class SubsetPolicy:
    """How many of a client's k local trees are uploaded.

    sqrt_k selects floor(sqrt(k)); fraction selects max(1, round(f * k)),
    rounding halves up.
    """

    kind: str = SQRT_K
    fraction: float | None = None

    def __post_init__(self):
        if self.kind not in (SQRT_K, FRACTION):
            raise FederationError(f"unknown subset policy {self.kind!r}")
        if self.kind == FRACTION:
            if self.fraction is None or not 0.0 < self.fraction <= 1.0:
                raise FederationError("fraction policy requires f in (0, 1]")
        elif self.fraction is not None:
            raise FederationError("sqrt_k policy takes no fraction")

    @classmethod
    def sqrt_k(cls) -> "SubsetPolicy":
        return cls(kind=SQRT_K)

    @classmethod
    def fraction_of(cls, f: float) -> "SubsetPolicy":
        return cls(kind=FRACTION, fraction=f)

    def n_selected(self, k: int) -> int:
        if k < 1:
            raise FederationError("subset policy: forest must hold trees")
        if self.kind == SQRT_K:
            return max(1, math.isqrt(k))
        return max(1, int(math.floor(self.fraction * k + 0.5)))

    def describe(self) -> str:
        if self.kind == SQRT_K:
            return "sqrt_k"
        return f"fraction({self.fraction:g})"


# ---------------------------------------------------------------------------
# Communication accounting
# ---------------------------------------------------------------------------

_KIND_NAMES = {
    wire.KIND_PARAMS: "params",
    wire.KIND_TREE: "tree",
    wire.KIND_ENSEMBLE: "ensemble",
    wire.KIND_CLASS_STATS: "class_stats",
}

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class LedgerEntry:
    round_index: int
    client_id: int
    direction: str
    bytes: int
    payload_kind: str


class CommLedger:
    """Append-only record of every transferred payload's canonical size.

    Reference sizes (payloads measured but never transmitted, e.g. the full
    local ensembles behind a reduction ratio) live in a separate map so they
    never pollute the traffic totals.
    """

    def __init__(self):
        self._entries: list[LedgerEntry] = []
        self._references: dict[str, int] = {}

    def record(self, round_index: int, client_id: int, direction: str,
               n_bytes: int, payload_kind: str) -> None:
        if direction not in (UP, DOWN):
            raise FederationError(f"ledger direction must be up or down, got {direction!r}")
        if n_bytes < 0:
            raise FederationError("ledger bytes must be non-negative")
        self._entries.append(
            LedgerEntry(round_index, client_id, direction, int(n_bytes), payload_kind)
        )

    def note_reference(self, label: str, n_bytes: int) -> None:
        self._references[label] = int(n_bytes)

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        # canonical report order: round, broadcast before upload, client id
        return tuple(
            sorted(
                self._entries,
                key=lambda e: (e.round_index, e.direction != DOWN, e.client_id),
            )
        )

    @property
    def references(self) -> dict[str, int]:
        return dict(self._references)

    def total_bytes(self, direction: str | None = None) -> int:
        return sum(e.bytes for e in self._entries
                   if direction is None or e.direction == direction)

    def up_bytes(self) -> int:
        return self.total_bytes(UP)

    def down_bytes(self) -> int:
        return self.total_bytes(DOWN)


class Channel:
    """In-process transport: serializes each payload into a framed byte
    string, logs its body size, and hands the decoded copy to the receiver.
    A network transport could replace this class without touching any
    protocol logic."""

    def __init__(self, ledger: CommLedger | None = None):
        self.ledger = ledger if ledger is not None else CommLedger()

    def transfer(self, payload, round_index: int, client_id: int, direction: str):
        data = wire.frame(payload)
        kind, body = wire.unframe(data)
        self.ledger.record(round_index, client_id, direction, len(body),
                           _KIND_NAMES[kind])
        if isinstance(payload, ParamVector):
            return wire.decode_params(body, payload.layout)
        if isinstance(payload, TreeEnsemble):
            return wire.decode_ensemble(
                body,
                payload.kind,
                base_score=payload.base_score,
                learning_rate=payload.learning_rate,
                n_features=payload.n_features,
            )
        if isinstance(payload, ClassStats):
            return wire.decode_class_stats(body)
        return wire.decode_tree(body)


# ---------------------------------------------------------------------------
# Global models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AveragedParams:
    """Parameter-averaged global model plus what is needed to apply it:
    the model kind, its local config, and the evaluation standardizer
    (mean of the clients' feature scalers)."""

    params: ParamVector
    model_kind: str
    config: object
    standardizer: Standardizer | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        if self.model_kind == "logistic":
            return (predict_logistic_proba(self.params, X) >= 0.5).astype(np.int64)
        if self.model_kind == "svm":
            return (svm_decision(self.params, X, self.config.degree) >= 0.0).astype(np.int64)
        if self.model_kind == "nn":
            return (nn_forward(self.params, X) >= 0.5).astype(np.int64)
        raise FederationError(f"unknown model kind {self.model_kind!r}")


@dataclass(frozen=True, eq=False)
class ForestUnion:
    """Union of the clients' uploaded tree subsets; majority vote."""

    ensemble: TreeEnsemble

    def __post_init__(self):
        if self.ensemble.kind != FOREST_VOTE:
            raise FederationError("forest union requires a forest_vote ensemble")

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_forest_vote_batch(self.ensemble, X)


@dataclass(frozen=True, eq=False)
class WeightedShallowTrees:
    """One shallow tree per client, voting with data-size weights.
    The decision boundary sits at 0.5 and classifies ties as 1."""

    ensemble: TreeEnsemble

    def __post_init__(self):
        if self.ensemble.kind != WEIGHTED_VOTE:
            raise FederationError("weighted shallow trees require a weighted_vote ensemble")

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.stack(
            [(tree_apply(t, X) >= 0.5).astype(np.float64) for t in self.ensemble.trees]
        )
        return self.ensemble.weights @ votes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.score(X) >= 0.5).astype(np.int64)


GlobalModel = AveragedParams | ForestUnion | WeightedShallowTrees


# ---------------------------------------------------------------------------
# Aggregation rules
# ---------------------------------------------------------------------------

def fedavg_aggregate(params: "list[ParamVector]", weights=None) -> ParamVector:
    """Elementwise mean of client parameter vectors.

    The default is the unweighted mean; passing weights (e.g. client data
    shares) switches to a weighted mean.
    """
    params = list(params)
    if not params:
        raise FederationError("fedavg_aggregate: empty parameter list")
    first = params[0]
    for p in params[1:]:
        if not first.same_layout(p):
            raise FederationError("fedavg_aggregate: parameter layouts differ")
    stack = np.stack([p.values for p in params])
    if weights is None:
        mean = stack.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.size != len(params) or (w < 0.0).any() or w.sum() <= 0.0:
            raise FederationError("fedavg_aggregate: invalid weights")
        mean = (w / w.sum()) @ stack
    return first.replace_values(mean)


@dataclass(frozen=True)
class DpConfig:
    """Gaussian mechanism on the averaged global parameters."""

    enabled: bool = False
    epsilon: float = 0.5
    delta: float = 1e-5
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise FederationError("dp config: epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise FederationError("dp config: delta must lie in (0, 1)")
        if self.clip_norm <= 0.0:
            raise FederationError("dp config: clip_norm must be positive")

    @property
    def sigma(self) -> float:
        return self.clip_norm * math.sqrt(2.0 * math.log(1.25 / self.delta)) / self.epsilon


def dp_gaussianize(params: ParamVector, dp: DpConfig, seed: int) -> ParamVector:
    """Clip to L2 norm <= clip_norm, then add N(0, sigma^2) per coordinate.
    Disabled configs pass parameters through untouched."""
    if not dp.enabled:
        return params
    values = np.array(params.values)
    norm = float(np.linalg.norm(values))
    if norm > dp.clip_norm:
        values *= dp.clip_norm / norm
    rng = np.random.default_rng(seed)
    return params.replace_values(values + rng.standard_normal(values.size) * dp.sigma)


# ---------------------------------------------------------------------------
# Local preparation shared by the protocols
# ---------------------------------------------------------------------------

def _resample_tables(clients, sampling: SamplingStrategy, seed: int,
                     channel: Channel) -> "tuple[DataTable, ...]":
    if sampling == SamplingStrategy.FEDERATED_SMOTE:
        return federated_smote_sync(clients, seed=seed, channel=channel)
    return tuple(
        apply_sampling(c.data, sampling, _derived_seed(seed, c.id, _SALT_SAMPLING))
        for c in clients
    )


def _require_two_classes(table: DataTable, client_id: int) -> None:
    n_neg, n_pos = table.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise FederationError(
            f"client {client_id} holds a single class after resampling"
        )


def fit_feature_scaler(table: DataTable) -> Standardizer:
    """Z-score scaler over the continuous columns; binary columns pass
    through so resampled tables stay schema-valid."""
    mu = table.X.mean(axis=0)
    sigma = table.X.std(axis=0)
    binary = table.schema.binary_mask()
    mu = np.where(binary, 0.0, mu)
    sigma = np.where(binary | (sigma <= 0.0), 1.0, sigma)
    return Standardizer(mu=mu, sigma=sigma)


def _standardized(table: DataTable, scaler: Standardizer) -> DataTable:
    return DataTable(table.schema, scaler.transform(table.X), table.y)


_PARAMETRIC_DEFAULTS = {
    "logistic": LogisticConfig,
    "svm": SvmConfig,
    "nn": NeuralNetConfig,
}


# ---------------------------------------------------------------------------
# Parametric federation (FedAvg / FedProx)
# ---------------------------------------------------------------------------

def run_parametric_federation(
    clients,
    model_kind: str,
    rounds: int = 20,
    local_config=None,
    sampling: SamplingStrategy = SamplingStrategy.NONE,
    dp: DpConfig = DpConfig(),
    ledger: CommLedger | None = None,
    seed: int = 0,
    weighted_average: bool = False,
    timings: dict | None = None,
) -> AveragedParams:
    """Broadcast, local training, upload, average, for the given number of
    rounds. Neural networks receive the broadcast parameters both as their
    starting point and as the proximal reference, so config.prox_mu > 0
    turns the local step into FedProx."""
    clients = _check_clients(clients)
    if rounds < 1:
        raise FederationError("run_parametric_federation: rounds must be at least 1")
    if model_kind not in _PARAMETRIC_DEFAULTS:
        raise FederationError(f"unknown model kind {model_kind!r}")
    config = local_config if local_config is not None else _PARAMETRIC_DEFAULTS[model_kind]()

    channel = Channel(ledger)
    tables = _resample_tables(clients, sampling, seed, channel)
    for client, table in zip(clients, tables):
        _require_two_classes(table, client.id)
    scalers = [fit_feature_scaler(t) for t in tables]
    tables = tuple(_standardized(t, s) for t, s in zip(tables, scalers))

    d = clients[0].data.n_features
    if model_kind == "logistic":
        theta = zeros_logistic(d)
    elif model_kind == "svm":
        theta = zeros_svm(d, config.degree)
    else:
        theta = init_nn_params(d, config.hidden_units, config.seed)

    size_weights = [c.size_weight for c in clients] if weighted_average else None
    for round_index in range(rounds):
        uploads = []
        started = time.perf_counter()
        for client, table in zip(clients, tables):
            received = channel.transfer(theta, round_index, client.id, DOWN)
            if model_kind == "logistic":
                local = train_logistic(table, config, init=received)
            elif model_kind == "svm":
                local = train_svm(table, config, init=received)
            else:
                local = train_nn(table, config, init=received, global_ref=received)
            uploads.append(channel.transfer(local, round_index, client.id, UP))
        _accumulate(timings, "local_seconds", time.perf_counter() - started)
        started = time.perf_counter()
        theta = fedavg_aggregate(uploads, weights=size_weights)
        if dp.enabled:
            theta = dp_gaussianize(theta, dp, _derived_seed(seed, round_index, _SALT_DP))
        _accumulate(timings, "aggregate_seconds", time.perf_counter() - started)

    return AveragedParams(
        params=theta,
        model_kind=model_kind,
        config=config,
        standardizer=Standardizer.mean_of(scalers),
    )


# ---------------------------------------------------------------------------
# Tree federation
# ---------------------------------------------------------------------------

def tree_subset_select(forest: TreeEnsemble, policy: SubsetPolicy, seed: int) -> TreeEnsemble:
    """Uniform sample without replacement of the policy's tree count,
    preserving the original tree order among the selected."""
    if forest.kind != FOREST_VOTE:
        raise FederationError("tree_subset_select: forest_vote ensemble required")
    k = len(forest.trees)
    if k == 0:
        raise FederationError("tree_subset_select: empty forest")
    s = policy.n_selected(k)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(k, size=s, replace=False))
    return TreeEnsemble(
        trees=tuple(forest.trees[i] for i in chosen),
        kind=FOREST_VOTE,
        n_features=forest.n_features,
    )


def run_forest_federation(
    clients,
    forest_config: ForestConfig = ForestConfig(),
    policy: SubsetPolicy = SubsetPolicy(),
    sampling: SamplingStrategy = SamplingStrategy.NONE,
    ledger: CommLedger | None = None,
    seed: int = 0,
    timings: dict | None = None,
) -> ForestUnion:
    """Single round: each client fits a local forest and uploads a sampled
    subset; the server concatenates the subsets into one voting forest."""
    clients = _check_clients(clients)
    channel = Channel(ledger)
    tables = _resample_tables(clients, sampling, seed, channel)
    uploads = []
    started = time.perf_counter()
    for client, table in zip(clients, tables):
        _require_two_classes(table, client.id)
        local_config = replace(
            forest_config,
            seed=_derived_seed(seed, forest_config.seed, client.id, _SALT_FOREST),
        )
        forest = fit_random_forest(table, local_config)
        subset = tree_subset_select(
            forest, policy, _derived_seed(seed, client.id, _SALT_SUBSET)
        )
        uploads.append(channel.transfer(subset, 0, client.id, UP))
    _accumulate(timings, "local_seconds", time.perf_counter() - started)
    started = time.perf_counter()
    union = tuple(tree for subset in uploads for tree in subset.trees)
    model = ForestUnion(
        TreeEnsemble(trees=union, kind=FOREST_VOTE,
                     n_features=clients[0].data.n_features)
    )
    _accumulate(timings, "aggregate_seconds", time.perf_counter() - started)
    return model


def run_xgb_feature_extraction(
    clients,
    gbt_config: GbtConfig = GbtConfig(),
    p: int = 8,
    shallow_depth: int = 4,
    sampling: SamplingStrategy = SamplingStrategy.NONE,
    ledger: CommLedger | None = None,
    seed: int = 0,
    timings: dict | None = None,
) -> WeightedShallowTrees:
    """Single round: each client fits a full boosted ensemble locally, keeps
    it private, and uploads one shallow tree built on its top-p features by
    total gain. The server weights each tree by the client's data share.
    The ledger keeps the unsent full-ensemble sizes as reference entries so
    the bandwidth reduction is measurable."""
    clients = _check_clients(clients)
    if p < 1:
        raise FederationError("run_xgb_feature_extraction: p must be at least 1")
    channel = Channel(ledger)
    tables = _resample_tables(clients, sampling, seed, channel)
    trees = []
    started = time.perf_counter()
    for client, table in zip(clients, tables):
        _require_two_classes(table, client.id)
        full = fit_gbt(table, gbt_config)
        channel.ledger.note_reference(
            f"client_{client.id}_full_gbt_bytes", ledger_bytes(full)
        )
        importance = gbt_feature_importance(full)
        shallow = fit_top_p_tree(table, importance, p, max_depth=shallow_depth)
        trees.append(channel.transfer(shallow, 0, client.id, UP))
    _accumulate(timings, "local_seconds", time.perf_counter() - started)
    started = time.perf_counter()
    weights = np.array([c.size_weight for c in clients])
    weights = weights / weights.sum()
    model = WeightedShallowTrees(
        TreeEnsemble(
            trees=tuple(trees),
            kind=WEIGHTED_VOTE,
            weights=weights,
            n_features=clients[0].data.n_features,
        )
    )
    _accumulate(timings, "aggregate_seconds", time.perf_counter() - started)
    return model


# ---------------------------------------------------------------------------
# Federated SMOTE
# ---------------------------------------------------------------------------

def aggregate_minority_stats(stats) -> tuple[np.ndarray, np.ndarray]:
    """Server-side reduction: unweighted means of the clients' minority
    moments. Accepts nothing but ClassStats records, which is the privacy
    boundary: no row data can reach this function."""
    stats = list(stats)
    if not stats:
        raise FederationError("aggregate_minority_stats: no statistics received")
    for s in stats:
        if not isinstance(s, ClassStats):
            raise FederationError(
                "aggregate_minority_stats: server accepts ClassStats records only, "
                f"got {type(s).__name__}"
            )
    if len({s.mu.size for s in stats}) != 1:
        raise FederationError("aggregate_minority_stats: feature dimensions differ")
    mu_g = np.mean([s.mu for s in stats], axis=0)
    sigma2_g = np.mean([s.sigma2 for s in stats], axis=0)
    return mu_g, sigma2_g


def _augment_with_synthetic(table: DataTable, stats: ClassStats, seed: int) -> DataTable:
    """Draw synthetic minority rows from N(mu_g, diag(sigma2_g)) until the
    table is balanced. Binary features round to {0,1}; continuous features
    clamp to the table's observed range."""
    if stats.mu.size != table.n_features:
        raise FederationError("synthetic augmentation: feature dimension mismatch")
    minority = table.minority_label()
    counts = table.class_counts()
    deficit = counts[1 - minority] - counts[minority]
    if deficit <= 0:
        return table
    rng = np.random.default_rng(seed)
    rows = stats.mu + rng.standard_normal((deficit, stats.mu.size)) * np.sqrt(stats.sigma2)
    binary = table.schema.binary_mask()
    rows[:, binary] = np.clip(np.floor(rows[:, binary] + 0.5), 0.0, 1.0)
    lo = table.X.min(axis=0)
    hi = table.X.max(axis=0)
    cont = ~binary
    rows[:, cont] = np.clip(rows[:, cont], lo[cont], hi[cont])
    return table.append_rows(rows, np.full(deficit, minority, dtype=np.int64))


def federated_smote_sync(
    clients,
    seed: int = 0,
    ledger: CommLedger | None = None,
    channel: Channel | None = None,
) -> "tuple[DataTable, ...]":
    """One statistics round: clients upload minority-class moments, the
    server averages them, and every client balances itself with Gaussian
    synthetic rows drawn from the averaged moments."""
    clients = tuple(clients)
    if not clients:
        raise FederationError("federated_smote_sync: no clients")
    if channel is None:
        channel = Channel(ledger)
    if len({c.data.minority_label() for c in clients}) != 1:
        raise FederationError(
            "federated_smote_sync: clients disagree on the minority class"
        )
    received = [
        channel.transfer(minority_class_stats(c.data), 0, c.id, UP)
        for c in clients
    ]
    mu_g, sigma2_g = aggregate_minority_stats(received)
    broadcast = ClassStats(mu=mu_g, sigma2=sigma2_g, n_minority=0, n_majority=0)
    augmented = []
    for client in clients:
        stats = channel.transfer(broadcast, 0, client.id, DOWN)
        augmented.append(
            _augment_with_synthetic(
                client.data, stats, _derived_seed(seed, client.id, _SALT_SMOTE)
            )
        )
    return tuple(augmented)
