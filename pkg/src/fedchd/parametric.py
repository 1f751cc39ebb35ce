"""Parametric models that expose flat parameter vectors for averaging.

Three models share the same federation surface: logistic regression with L2
regularization, a linear SVM over an explicit polynomial feature expansion
(so weight averaging stays well-defined), and a one-hidden-layer sigmoid
network with an optional proximal pull toward a reference vector. Each
model's objective and analytic gradient are exposed separately so tests can
check them against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .data import DataTable, DatasetError


class ModelError(ValueError):
    """Layout mismatch, invalid configuration, or a diverging optimization."""


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat parameter values plus a (segment name, length) layout."""

    values: np.ndarray
    layout: tuple[tuple[str, int], ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        layout = tuple((str(n), int(k)) for n, k in self.layout)
        if sum(k for _, k in layout) != values.size:
            raise ModelError("param vector: layout lengths do not sum to value count")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "layout", layout)

    def __len__(self) -> int:
        return self.values.size

    def same_layout(self, other: "ParamVector") -> bool:
        return self.layout == other.layout

    def segment(self, name: str) -> np.ndarray:
        offset = 0
        for seg, length in self.layout:
            if seg == name:
                return self.values[offset:offset + length]
            offset += length
        raise ModelError(f"param vector: no segment named {name!r}")

    def replace_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.layout)


@dataclass(frozen=True)
class LogisticConfig:
    l2_lambda: float = 0.01
    max_iter: int = 200
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ModelError("logistic config: tolerance must be positive")
        if self.l2_lambda < 0.0:
            raise ModelError("logistic config: l2_lambda must be non-negative")


@dataclass(frozen=True)
class SvmConfig:
    degree: int = 3
    c: float = 1.0
    epochs: int = 300
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.degree < 1:
            raise ModelError("svm config: degree must be at least 1")
        if self.c <= 0.0:
            raise ModelError("svm config: c must be positive")


@dataclass(frozen=True)
class NeuralNetConfig:
    hidden_units: int = 16
    epochs: int = 50
    learning_rate: float = 0.5
    prox_mu: float = 0.0
    seed: int = 0
    batch_size: int = 32

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ModelError("nn config: hidden_units must be at least 1")
        if self.prox_mu < 0.0:
            raise ModelError("nn config: prox_mu must be non-negative")


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score transform; zero-spread columns pass through."""

    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mu = X.mean(axis=0)
        sigma = X.std(axis=0)
        return cls(mu=mu, sigma=np.where(sigma > 0.0, sigma, 1.0))

    @classmethod
    def mean_of(cls, scalers: "list[Standardizer]") -> "Standardizer":
        return cls(
            mu=np.mean([s.mu for s in scalers], axis=0),
            sigma=np.mean([s.sigma for s in scalers], axis=0),
        )

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mu) / self.sigma


# ---------------------------------------------------------------------------
# Polynomial feature expansion
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _monomials(n_features: int, degree: int) -> tuple[tuple[int, ...], ...]:
    combos: list[tuple[int, ...]] = []
    for total in range(degree + 1):
        combos.extend(combinations_with_replacement(range(n_features), total))
    return tuple(combos)


def poly_length(n_features: int, degree: int) -> int:
    return math.comb(n_features + degree, degree)


def poly_feature_map(x: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree <= degree, constant term first.

    Ordering is graded: degree 0, then degree 1 in feature order, then each
    higher degree in lexicographic index combinations. Output length is
    C(d + degree, degree).
    """
    if degree < 1:
        raise ModelError("poly_feature_map: degree must be at least 1")
    x = np.asarray(x, dtype=np.float64).ravel()
    return poly_expand(x[None, :], degree)[0]


def poly_expand(X: np.ndarray, degree: int) -> np.ndarray:
    """Row-wise polynomial expansion of a feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    combos = _monomials(X.shape[1], degree)
    out = np.empty((X.shape[0], len(combos)))
    out[:, 0] = 1.0
    for j, combo in enumerate(combos[1:], start=1):
        col = X[:, combo[0]].copy()
        for idx in combo[1:]:
            col *= X[:, idx]
        out[:, j] = col
    return out


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def logistic_layout(n_features: int) -> tuple[tuple[str, int], ...]:
    return (("weights", n_features), ("bias", 1))


def zeros_logistic(n_features: int) -> ParamVector:
    return ParamVector(np.zeros(n_features + 1), logistic_layout(n_features))


def _logistic_split(params: ParamVector, n_features: int):
    if params.layout != logistic_layout(n_features):
        raise ModelError("logistic: parameter layout does not match feature count")
    return params.segment("weights"), params.segment("bias")[0]


def logistic_objective(params: ParamVector, X: np.ndarray, y: np.ndarray,
                       l2_lambda: float) -> float:
    """Mean log-loss plus (lambda/2)*||w||^2; the bias is unpenalized."""
    w, b = _logistic_split(params, X.shape[1])
    z = X @ w + b
    # log(1 + exp(z)) - y*z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss + 0.5 * l2_lambda * float(w @ w)


def logistic_gradient(params: ParamVector, X: np.ndarray, y: np.ndarray,
                      l2_lambda: float) -> ParamVector:
    w, b = _logistic_split(params, X.shape[1])
    residual = expit(X @ w + b) - y
    grad_w = X.T @ residual / len(y) + l2_lambda * w
    grad_b = residual.mean()
    return ParamVector(np.append(grad_w, grad_b), params.layout)


def train_logistic(
    train: DataTable,
    config: LogisticConfig = LogisticConfig(),
    init: ParamVector | None = None,
) -> ParamVector:
    """Fit by quasi-Newton descent to gradient norm <= tolerance or max_iter."""
    _require_both_classes(train)
    X, y = train.X, train.y.astype(np.float64)
    if init is None:
        init = zeros_logistic(X.shape[1])
    layout = logistic_layout(X.shape[1])
    if init.layout != layout:
        raise ModelError("logistic: init layout does not match feature count")

    def objective(theta):
        value = logistic_objective(ParamVector(theta, layout), X, y, config.l2_lambda)
        if not np.isfinite(value):
            raise ModelError("logistic: non-finite loss during optimization")
        return value

    def gradient(theta):
        return logistic_gradient(ParamVector(theta, layout), X, y, config.l2_lambda).values

    result = minimize(
        objective,
        np.array(init.values),
        jac=gradient,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "gtol": config.tolerance},
    )
    return ParamVector(result.x, layout)


def predict_logistic_proba(params: ParamVector, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    w, b = _logistic_split(params, X.shape[1])
    return expit(X @ w + b)


def predict_logistic(params: ParamVector, x: np.ndarray) -> float:
    """Class-1 probability for a single feature vector."""
    return float(predict_logistic_proba(params, np.asarray(x).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# SVM on an explicit polynomial feature map
# ---------------------------------------------------------------------------

def svm_layout(n_features: int, degree: int) -> tuple[tuple[str, int], ...]:
    return ((f"poly{degree}_weights", poly_length(n_features, degree)),)


def zeros_svm(n_features: int, degree: int) -> ParamVector:
    return ParamVector(
        np.zeros(poly_length(n_features, degree)), svm_layout(n_features, degree)
    )


def svm_objective(params: ParamVector, X: np.ndarray, y: np.ndarray,
                  config: SvmConfig) -> float:
    """0.5*||w||^2 + C * mean hinge loss over the expanded features."""
    Phi = poly_expand(X, config.degree)
    w = params.values
    if w.size != Phi.shape[1]:
        raise ModelError("svm: parameter layout does not match expanded features")
    sign = np.where(np.asarray(y) == 1, 1.0, -1.0)
    margins = sign * (Phi @ w)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * float(w @ w) + config.c * float(hinge.mean())


def svm_gradient(params: ParamVector, X: np.ndarray, y: np.ndarray,
                 config: SvmConfig) -> ParamVector:
    """Subgradient; at hinge kinks (margin exactly 1) the zero branch is used."""
    Phi = poly_expand(X, config.degree)
    w = params.values
    if w.size != Phi.shape[1]:
        raise ModelError("svm: parameter layout does not match expanded features")
    sign = np.where(np.asarray(y) == 1, 1.0, -1.0)
    violating = sign * (Phi @ w) < 1.0
    grad = w - config.c * (Phi[violating].T @ sign[violating]) / len(sign)
    return ParamVector(grad, params.layout)


def train_svm(
    train: DataTable,
    config: SvmConfig = SvmConfig(),
    init: ParamVector | None = None,
) -> ParamVector:
    """Full-batch subgradient descent with a 1/sqrt(t) step decay."""
    _require_both_classes(train)
    d = train.n_features
    if init is None:
        init = zeros_svm(d, config.degree)
    if init.layout != svm_layout(d, config.degree):
        raise ModelError("svm: init layout does not match feature count and degree")

    Phi = poly_expand(train.X, config.degree)
    sign = np.where(train.y == 1, 1.0, -1.0)
    w = np.array(init.values)
    n = len(sign)
    for t in range(config.epochs):
        violating = sign * (Phi @ w) < 1.0
        grad = w - config.c * (Phi[violating].T @ sign[violating]) / n
        w -= config.learning_rate / math.sqrt(t + 1.0) * grad
    return ParamVector(w, init.layout)


def svm_decision(params: ParamVector, X: np.ndarray, degree: int) -> np.ndarray:
    Phi = poly_expand(np.atleast_2d(np.asarray(X, dtype=np.float64)), degree)
    if params.values.size != Phi.shape[1]:
        raise ModelError("svm: parameter layout does not match expanded features")
    return Phi @ params.values


def predict_svm(params: ParamVector, x: np.ndarray, degree: int) -> int:
    """Class decision for one feature vector; the boundary maps to class 1."""
    value = svm_decision(params, np.asarray(x).reshape(1, -1), degree)[0]
    return 1 if value >= 0.0 else 0


# ---------------------------------------------------------------------------
# One-hidden-layer sigmoid network
# ---------------------------------------------------------------------------

def nn_layout(n_features: int, hidden_units: int) -> tuple[tuple[str, int], ...]:
    return (
        ("W1", hidden_units * n_features),
        ("b1", hidden_units),
        ("W2", hidden_units),
        ("b2", 1),
    )


def init_nn_params(n_features: int, hidden_units: int, seed: int) -> ParamVector:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / math.sqrt(n_features)
    bound2 = 1.0 / math.sqrt(hidden_units)
    values = np.concatenate([
        rng.uniform(-bound1, bound1, hidden_units * n_features),
        rng.uniform(-bound1, bound1, hidden_units),
        rng.uniform(-bound2, bound2, hidden_units),
        rng.uniform(-bound2, bound2, 1),
    ])
    return ParamVector(values, nn_layout(n_features, hidden_units))


def _nn_split(params: ParamVector, n_features: int):
    hidden = params.segment("b1").size
    if params.layout != nn_layout(n_features, hidden):
        raise ModelError("nn: parameter layout does not match feature count")
    W1 = params.segment("W1").reshape(hidden, n_features)
    return W1, params.segment("b1"), params.segment("W2"), params.segment("b2")[0]


def nn_forward(params: ParamVector, X: np.ndarray) -> np.ndarray:
    """Class-1 probabilities: sigmoid hidden layer, sigmoid output."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    W1, b1, W2, b2 = _nn_split(params, X.shape[1])
    a1 = expit(X @ W1.T + b1)
    return expit(a1 @ W2 + b2)


def nn_objective(params: ParamVector, X: np.ndarray, y: np.ndarray,
                 prox_mu: float = 0.0,
                 global_ref: ParamVector | None = None) -> float:
    """Mean binary cross-entropy plus the optional proximal penalty."""
    X = np.atleast_2d(X)
    W1, b1, W2, b2 = _nn_split(params, X.shape[1])
    z2 = expit(X @ W1.T + b1) @ W2 + b2
    loss = float(np.mean(np.logaddexp(0.0, z2) - np.asarray(y) * z2))
    if global_ref is not None and prox_mu > 0.0:
        diff = params.values - global_ref.values
        loss += 0.5 * prox_mu * float(diff @ diff)
    if not np.isfinite(loss):
        raise ModelError("nn: non-finite loss")
    return loss


def nn_gradient(params: ParamVector, X: np.ndarray, y: np.ndarray,
                prox_mu: float = 0.0,
                global_ref: ParamVector | None = None) -> ParamVector:
    X = np.atleast_2d(X)
    n = X.shape[0]
    W1, b1, W2, b2 = _nn_split(params, X.shape[1])
    a1 = expit(X @ W1.T + b1)
    p = expit(a1 @ W2 + b2)
    dz2 = (p - np.asarray(y, dtype=np.float64)) / n
    gW2 = a1.T @ dz2
    gb2 = dz2.sum()
    dz1 = np.outer(dz2, W2) * a1 * (1.0 - a1)
    gW1 = dz1.T @ X
    gb1 = dz1.sum(axis=0)
    grad = np.concatenate([gW1.ravel(), gb1, gW2, [gb2]])
    if global_ref is not None and prox_mu > 0.0:
        grad = grad + prox_mu * (params.values - global_ref.values)
    return ParamVector(grad, params.layout)


def train_nn(
    train: DataTable,
    config: NeuralNetConfig,
    init: ParamVector,
    global_ref: ParamVector | None = None,
) -> ParamVector:
    """Mini-batch gradient descent; with global_ref the proximal term pulls
    parameters toward it. Deterministic given config.seed."""
    _require_both_classes(train)
    X, y = train.X, train.y.astype(np.float64)
    if init.layout != nn_layout(X.shape[1], config.hidden_units):
        raise ModelError("nn: init layout does not match configuration")
    if global_ref is not None and global_ref.layout != init.layout:
        raise ModelError("nn: global reference layout mismatch")

    rng = np.random.default_rng(config.seed)
    theta = ParamVector(init.values, init.layout)
    n = len(y)
    batch = max(1, min(config.batch_size, n))
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            grad = nn_gradient(theta, X[idx], y[idx], config.prox_mu, global_ref)
            theta = theta.replace_values(
                theta.values - config.learning_rate * grad.values
            )
    if not np.isfinite(theta.values).all():
        raise ModelError("nn: non-finite parameters after training")
    return theta


def predict_nn(params: ParamVector, x: np.ndarray) -> float:
    return float(nn_forward(params, np.asarray(x).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# Shared dispatch surface
# ---------------------------------------------------------------------------

_DEFAULT_CONFIGS = {
    "logistic": LogisticConfig,
    "svm": SvmConfig,
    "nn": NeuralNetConfig,
}


def objective_of(model_kind: str, params: ParamVector, batch: DataTable,
                 config=None, global_ref: ParamVector | None = None) -> float:
    """Training objective value on a batch, for the given model kind."""
    config = config or _DEFAULT_CONFIGS[model_kind]()
    y = batch.y.astype(np.float64)
    if model_kind == "logistic":
        return logistic_objective(params, batch.X, y, config.l2_lambda)
    if model_kind == "svm":
        return svm_objective(params, batch.X, batch.y, config)
    if model_kind == "nn":
        return nn_objective(params, batch.X, y, config.prox_mu, global_ref)
    raise ModelError(f"unknown model kind {model_kind!r}")


def gradient_of(model_kind: str, params: ParamVector, batch: DataTable,
                config=None, global_ref: ParamVector | None = None) -> ParamVector:
    """Analytic gradient of the training objective on a batch."""
    config = config or _DEFAULT_CONFIGS[model_kind]()
    y = batch.y.astype(np.float64)
    if model_kind == "logistic":
        return logistic_gradient(params, batch.X, y, config.l2_lambda)
    if model_kind == "svm":
        return svm_gradient(params, batch.X, batch.y, config)
    if model_kind == "nn":
        return nn_gradient(params, batch.X, y, config.prox_mu, global_ref)
    raise ModelError(f"unknown model kind {model_kind!r}")


def _require_both_classes(table: DataTable) -> None:
    n_neg, n_pos = table.class_counts()
    if n_neg == 0 or n_pos == 0:
        raise DatasetError("training requires both classes present")
