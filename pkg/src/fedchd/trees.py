"""From-scratch decision trees: CART, bagged forests, gradient boosting.

Split candidates are midpoints between consecutive sorted unique feature
values, scanned front to back so ties resolve to the lowest feature index
and then the lowest threshold. Forest leaves store the class-1 fraction;
boosted leaves store additive log-odds scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import DataTable, DatasetError


class TreeError(ValueError):
    pass


@dataclass
class TreeNode:
    """Binary tree node; a leaf iff left is None. Routes x left when
    x[feature_index] <= threshold. Internal nodes remember their split gain
    so ensemble feature importance can be accumulated later."""

    value: float = 0.0
    feature_index: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def node_count(self) -> int:
        if self.is_leaf:
            return 1
        return 1 + self.left.node_count() + self.right.node_count()

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


FOREST_VOTE = "forest_vote"
BOOSTED_SUM = "boosted_sum"
WEIGHTED_VOTE = "weighted_vote"
_ENSEMBLE_KINDS = (FOREST_VOTE, BOOSTED_SUM, WEIGHTED_VOTE)


@dataclass(frozen=True, eq=False)
class TreeEnsemble:
    """A list of trees plus how their outputs combine.

    base_score and learning_rate only matter for boosted ensembles;
    weights are required (and must sum to 1) exactly for weighted voting.
    """

    trees: tuple[TreeNode, ...]
    kind: str
    weights: np.ndarray | None = None
    base_score: float = 0.0
    learning_rate: float = 1.0
    n_features: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if self.kind not in _ENSEMBLE_KINDS:
            raise TreeError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == WEIGHTED_VOTE:
            if self.weights is None:
                raise TreeError("weighted_vote ensemble requires weights")
            w = np.asarray(self.weights, dtype=np.float64)
            if w.size != len(self.trees):
                raise TreeError("one weight per tree required")
            if not math.isclose(float(w.sum()), 1.0, rel_tol=0.0, abs_tol=1e-9):
                raise TreeError("weights must sum to 1")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise TreeError(f"{self.kind} ensemble must not carry weights")

    def __len__(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_split: int = 2
    feature_subsample: "str | int | None" = "sqrt"  # per-split rule
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise TreeError("forest config: n_trees must be at least 1")


@dataclass(frozen=True)
class GbtConfig:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 4
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise TreeError("gbt config: learning_rate must be positive")
        if self.reg_lambda < 0.0 or self.min_child_weight < 0.0:
            raise TreeError("gbt config: regularizers must be non-negative")


@dataclass(frozen=True)
class FeatureImportance:
    """Non-negative per-feature scores and the descending-score ranking."""

    scores: np.ndarray
    ranking: np.ndarray

    @classmethod
    def from_scores(cls, scores: np.ndarray) -> "FeatureImportance":
        scores = np.asarray(scores, dtype=np.float64)
        # descending score, ties by ascending feature index
        ranking = np.lexsort((np.arange(scores.size), -scores))
        scores.setflags(write=False)
        ranking.setflags(write=False)
        return cls(scores=scores, ranking=ranking)


# ---------------------------------------------------------------------------
# Tree evaluation
# ---------------------------------------------------------------------------

def tree_predict(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf:
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.value


def tree_apply(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf values for every row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if idx.size == 0:
            continue
        if nd.is_leaf:
            out[idx] = nd.value
        else:
            mask = X[idx, nd.feature_index] <= nd.threshold
            stack.append((nd.left, idx[mask]))
            stack.append((nd.right, idx[~mask]))
    return out


def tree_feature_indices(node: TreeNode) -> set[int]:
    if node.is_leaf:
        return set()
    return ({node.feature_index}
            | tree_feature_indices(node.left)
            | tree_feature_indices(node.right))


# ---------------------------------------------------------------------------
# CART (Gini)
# ---------------------------------------------------------------------------

def _best_gini_split(X: np.ndarray, y: np.ndarray, feature_ids) -> tuple | None:
    """Minimum weighted-Gini split over the given features, or None.

    Candidates are midpoints of consecutive distinct sorted values; the scan
    keeps the first strict improvement, so ties break to the lowest feature
    index, then the lowest threshold.
    """
    n = y.size
    total_pos = int(y.sum())
    best_score = math.inf
    best = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        boundary = np.flatnonzero(xs[:-1] != xs[1:])
        if boundary.size == 0:
            continue
        cum_pos = np.cumsum(ys)
        n_left = (boundary + 1).astype(np.float64)
        pos_left = cum_pos[boundary].astype(np.float64)
        n_right = n - n_left
        pos_right = total_pos - pos_left
        p_l = pos_left / n_left
        q_l = (n_left - pos_left) / n_left
        p_r = pos_right / n_right
        q_r = (n_right - pos_right) / n_right
        gini_l = 1.0 - p_l * p_l - q_l * q_l
        gini_r = 1.0 - p_r * p_r - q_r * q_r
        weighted = (n_left * gini_l + n_right * gini_r) / n
        i = int(np.argmin(weighted))
        if weighted[i] < best_score:
            b = boundary[i]
            best_score = float(weighted[i])
            best = (best_score, int(f), float((xs[b] + xs[b + 1]) / 2.0))
    return best


def fit_cart(
    train: DataTable,
    max_depth: int = 12,
    min_samples_split: int = 2,
    feature_subset=None,
    seed: int = 0,
    features_per_split: int | None = None,
) -> TreeNode:
    """Greedy Gini tree; leaves hold the class-1 fraction.

    feature_subset statically restricts candidate features;
    features_per_split additionally samples that many candidates per split
    (the forest's per-split subsampling). A node with no usable split
    becomes a leaf.
    """
    if len(train) == 0:
        raise DatasetError("fit_cart: empty table")
    X, y = train.X, train.y
    if feature_subset is None:
        candidates = np.arange(train.n_features)
    else:
        candidates = np.sort(np.asarray(feature_subset, dtype=np.intp))
        if candidates.size == 0:
            raise TreeError("fit_cart: empty feature subset")
        if candidates[0] < 0 or candidates[-1] >= train.n_features:
            raise TreeError("fit_cart: feature subset index out of range")
    rng = np.random.default_rng(seed)

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        ys = y[idx]
        positive_fraction = float(ys.mean())
        if (
            depth >= max_depth
            or idx.size < min_samples_split
            or positive_fraction in (0.0, 1.0)
        ):
            return TreeNode(value=positive_fraction)
        feats = candidates
        if features_per_split is not None and features_per_split < candidates.size:
            feats = np.sort(rng.choice(candidates, size=features_per_split, replace=False))
        found = _best_gini_split(X[idx], ys, feats)
        if found is None:
            return TreeNode(value=positive_fraction)
        _, feat, thr = found
        mask = X[idx, feat] <= thr
        return TreeNode(
            value=positive_fraction,
            feature_index=feat,
            threshold=thr,
            left=build(idx[mask], depth + 1),
            right=build(idx[~mask], depth + 1),
        )

    return build(np.arange(len(train)), 0)


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

def _per_split_count(rule, n_features: int) -> int | None:
    if rule is None:
        return None
    if rule == "sqrt":
        return max(1, int(math.floor(math.sqrt(n_features))))
    if isinstance(rule, int):
        return max(1, min(rule, n_features))
    raise TreeError(f"unknown feature_subsample rule {rule!r}")


def _tree_seed(seed: int, tree_index: int, salt: int) -> int:
    return int(np.random.SeedSequence([seed, tree_index, salt]).generate_state(1)[0])


def fit_random_forest(train: DataTable, config: ForestConfig) -> TreeEnsemble:
    """k bagged Gini trees with per-split feature subsampling."""
    if len(train) == 0:
        raise DatasetError("fit_random_forest: empty table")
    per_split = _per_split_count(config.feature_subsample, train.n_features)
    trees = []
    for i in range(config.n_trees):
        if config.bootstrap:
            rng = np.random.default_rng([config.seed, i])
            sample = train.take(rng.integers(0, len(train), size=len(train)))
        else:
            sample = train
        trees.append(
            fit_cart(
                sample,
                max_depth=config.max_depth,
                min_samples_split=config.min_samples_split,
                seed=_tree_seed(config.seed, i, 1),
                features_per_split=per_split,
            )
        )
    return TreeEnsemble(trees=tuple(trees), kind=FOREST_VOTE,
                        n_features=train.n_features)


def forest_votes(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Per-tree class votes, shape (n_trees, n_rows)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.stack([tree_apply(t, X) >= 0.5 for t in ensemble.trees]).astype(np.int64)


def predict_forest_vote(ensemble: TreeEnsemble, x: np.ndarray) -> int:
    """Majority vote over tree leaf classes; an exact tie predicts 1."""
    if ensemble.kind != FOREST_VOTE:
        raise TreeError("predict_forest_vote: ensemble kind mismatch")
    if not ensemble.trees:
        raise TreeError("predict_forest_vote: empty ensemble")
    ones = sum(1 for t in ensemble.trees if tree_predict(t, np.asarray(x)) >= 0.5)
    return 1 if 2 * ones >= len(ensemble.trees) else 0


def predict_forest_vote_batch(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    if ensemble.kind != FOREST_VOTE:
        raise TreeError("predict_forest_vote: ensemble kind mismatch")
    if not ensemble.trees:
        raise TreeError("predict_forest_vote: empty ensemble")
    ones = forest_votes(ensemble, X).sum(axis=0)
    return (2 * ones >= len(ensemble.trees)).astype(np.int64)


# ---------------------------------------------------------------------------
# Gradient boosting (second-order, logistic loss)
# ---------------------------------------------------------------------------

def _best_gain_split(X, g, h, reg_lambda, min_child_weight):
    """Maximum-gain split under the second-order objective, or None."""
    G = float(g.sum())
    H = float(h.sum())
    parent = G * G / (H + reg_lambda) if (H + reg_lambda) > 0.0 else 0.0
    best_gain = 0.0
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        boundary = np.flatnonzero(xs[:-1] != xs[1:])
        if boundary.size == 0:
            continue
        cum_g = np.cumsum(g[order])
        cum_h = np.cumsum(h[order])
        GL = cum_g[boundary]
        HL = cum_h[boundary]
        GR = G - GL
        HR = H - HL
        gain = 0.5 * (
            GL * GL / (HL + reg_lambda)
            + GR * GR / (HR + reg_lambda)
            - parent
        )
        gain[(HL < min_child_weight) | (HR < min_child_weight)] = -math.inf
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            b = boundary[i]
            best_gain = float(gain[i])
            best = (best_gain, int(f), float((xs[b] + xs[b + 1]) / 2.0))
    return best


def _leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    denom = h_sum + reg_lambda
    return -g_sum / denom if denom > 0.0 else 0.0


def _fit_gbt_tree(X, g, h, config: GbtConfig) -> TreeNode:
    def build(idx: np.ndarray, depth: int) -> TreeNode:
        gs, hs = g[idx], h[idx]
        leaf = TreeNode(value=_leaf_weight(float(gs.sum()), float(hs.sum()),
                                           config.reg_lambda))
        if depth >= config.max_depth or idx.size < 2:
            return leaf
        found = _best_gain_split(X[idx], gs, hs, config.reg_lambda,
                                 config.min_child_weight)
        if found is None:
            return leaf
        gain, feat, thr = found
        mask = X[idx, feat] <= thr
        return TreeNode(
            value=leaf.value,
            feature_index=feat,
            threshold=thr,
            gain=gain,
            left=build(idx[mask], depth + 1),
            right=build(idx[~mask], depth + 1),
        )

    return build(np.arange(X.shape[0]), 0)


def fit_gbt(train: DataTable, config: GbtConfig = GbtConfig()) -> TreeEnsemble:
    """Additive log-odds model; each round fits a tree to gradient/hessian
    statistics of the logistic loss and contributes learning_rate times its
    leaf scores."""
    n_neg, n_pos = train.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise DatasetError("fit_gbt: training requires both classes")
    X = train.X
    y = train.y.astype(np.float64)
    prior = n_pos / len(train)
    base = math.log(prior / (1.0 - prior))
    margin = np.full(len(train), base)
    trees = []
    for _ in range(config.n_rounds):
        p = expit(margin)
        g = p - y
        h = p * (1.0 - p)
        tree = _fit_gbt_tree(X, g, h, config)
        margin = margin + config.learning_rate * tree_apply(tree, X)
        trees.append(tree)
    return TreeEnsemble(
        trees=tuple(trees),
        kind=BOOSTED_SUM,
        base_score=base,
        learning_rate=config.learning_rate,
        n_features=train.n_features,
    )


def gbt_margin(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    if ensemble.kind != BOOSTED_SUM:
        raise TreeError("gbt: ensemble kind mismatch")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    margin = np.full(X.shape[0], ensemble.base_score)
    for tree in ensemble.trees:
        margin = margin + ensemble.learning_rate * tree_apply(tree, X)
    return margin


def predict_gbt_proba(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    return expit(gbt_margin(ensemble, X))


def predict_gbt(ensemble: TreeEnsemble, x: np.ndarray) -> float:
    """Class-1 probability for a single feature vector."""
    return float(predict_gbt_proba(ensemble, np.asarray(x).reshape(1, -1))[0])


def gbt_log_loss(ensemble: TreeEnsemble, table: DataTable) -> float:
    z = gbt_margin(ensemble, table.X)
    y = table.y.astype(np.float64)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def gbt_feature_importance(ensemble: TreeEnsemble) -> FeatureImportance:
    """Total split gain per feature, summed over every internal node."""
    if ensemble.kind != BOOSTED_SUM:
        raise TreeError("gbt_feature_importance: ensemble kind mismatch")
    n_features = ensemble.n_features
    if n_features <= 0:
        n_features = 1 + max(
            (max(tree_feature_indices(t), default=-1) for t in ensemble.trees),
            default=-1,
        )
    scores = np.zeros(max(n_features, 1))

    def visit(node: TreeNode):
        if node.is_leaf:
            return
        scores[node.feature_index] += node.gain
        visit(node.left)
        visit(node.right)

    for tree in ensemble.trees:
        visit(tree)
    return FeatureImportance.from_scores(scores)


def fit_top_p_tree(
    train: DataTable,
    importance: FeatureImportance,
    p: int,
    max_depth: int = 4,
) -> TreeNode:
    """Single CART tree restricted to the p highest-ranked features."""
    if p < 1:
        raise TreeError("fit_top_p_tree: p must be at least 1")
    if p > train.n_features:
        raise TreeError("fit_top_p_tree: p exceeds the feature count")
    return fit_cart(
        train,
        max_depth=max_depth,
        feature_subset=importance.ranking[:p],
    )
