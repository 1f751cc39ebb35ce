import math

import numpy as np
import pytest

from fedchd.data import CONTINUOUS, DataTable, DatasetError, FeatureSchema
from fedchd.parametric import (
    LogisticConfig,
    ModelError,
    NeuralNetConfig,
    ParamVector,
    Standardizer,
    SvmConfig,
    gradient_of,
    init_nn_params,
    logistic_gradient,
    logistic_layout,
    logistic_objective,
    nn_forward,
    nn_layout,
    objective_of,
    poly_expand,
    poly_feature_map,
    poly_length,
    predict_logistic_proba,
    svm_decision,
    svm_layout,
    train_logistic,
    train_nn,
    train_svm,
    zeros_logistic,
    zeros_svm,
)


def make_table(X, y) -> DataTable:
    X = np.asarray(X, dtype=np.float64)
    schema = FeatureSchema(
        names=tuple(f"x{i}" for i in range(X.shape[1])),
        kinds=tuple(CONTINUOUS for _ in range(X.shape[1])),
        label_name="label",
    )
    return DataTable(schema, X, np.asarray(y, dtype=np.int64))


def random_batch(rng, n_features, n_rows=16):
    X = rng.normal(size=(n_rows, n_features))
    y = rng.integers(0, 2, size=n_rows)
    y[0], y[1] = 0, 1  # keep both classes present
    return make_table(X, y)


def finite_difference(model_kind, params, batch, config, global_ref=None, step=1e-5):
    grad = np.empty(len(params))
    base = np.array(params.values)
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] += step
        up = objective_of(model_kind, ParamVector(bumped, params.layout), batch,
                          config, global_ref)
        bumped[i] = base[i] - step
        down = objective_of(model_kind, ParamVector(bumped, params.layout), batch,
                            config, global_ref)
        grad[i] = (up - down) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric):
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / scale))


class TestPolyExpansion:
    def test_length_formula(self):
        assert poly_length(2, 2) == 6
        assert poly_length(14, 3) == 680
        assert poly_length(5, 1) == 6

    def test_two_feature_degree_two_content(self):
        x = np.array([2.0, 3.0])
        phi = poly_feature_map(x, 2)
        np.testing.assert_allclose(phi, [1.0, 2.0, 3.0, 4.0, 6.0, 9.0])

    def test_constant_term_first(self):
        rng = np.random.default_rng(0)
        phi = poly_expand(rng.normal(size=(5, 3)), 3)
        np.testing.assert_array_equal(phi[:, 0], np.ones(5))

    def test_degree_one_is_affine_embedding(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(4, 3))
        phi = poly_expand(X, 1)
        np.testing.assert_allclose(phi[:, 1:], X)

    def test_invalid_degree_rejected(self):
        with pytest.raises(ModelError):
            poly_feature_map(np.array([1.0]), 0)


class TestGradientOracle:
    def test_logistic_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        config = LogisticConfig(l2_lambda=0.01)
        for _ in range(10):
            batch = random_batch(rng, 4)
            params = ParamVector(rng.normal(scale=0.5, size=5),
                                 logistic_layout(4))
            analytic = gradient_of("logistic", params, batch, config).values
            numeric = finite_difference("logistic", params, batch, config)
            assert max_relative_error(analytic, numeric) < 1e-4

    def test_svm_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        config = SvmConfig(degree=2, c=1.0)
        for _ in range(10):
            batch = random_batch(rng, 3)
            while True:
                params = ParamVector(
                    rng.normal(scale=0.5, size=poly_length(3, 2)),
                    svm_layout(3, 2),
                )
                sign = np.where(batch.y == 1, 1.0, -1.0)
                margins = sign * (poly_expand(batch.X, 2) @ params.values)
                if np.all(np.abs(margins - 1.0) > 1e-3):
                    break  # stay away from hinge kinks
            analytic = gradient_of("svm", params, batch, config).values
            numeric = finite_difference("svm", params, batch, config)
            assert max_relative_error(analytic, numeric) < 1e-4

    def test_nn_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        config = NeuralNetConfig(hidden_units=3)
        for _ in range(10):
            batch = random_batch(rng, 4)
            params = init_nn_params(4, 3, seed=int(rng.integers(1000)))
            analytic = gradient_of("nn", params, batch, config).values
            numeric = finite_difference("nn", params, batch, config)
            assert max_relative_error(analytic, numeric) < 1e-4

    def test_nn_proximal_term_included_in_gradient(self):
        rng = np.random.default_rng(5)
        config = NeuralNetConfig(hidden_units=3, prox_mu=0.7)
        batch = random_batch(rng, 4)
        params = init_nn_params(4, 3, seed=1)
        ref = init_nn_params(4, 3, seed=2)
        analytic = gradient_of("nn", params, batch, config, global_ref=ref).values
        numeric = finite_difference("nn", params, batch, config, global_ref=ref)
        assert max_relative_error(analytic, numeric) < 1e-4


class TestLogistic:
    def test_separable_data_fits(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(120, 2))
        y = (X[:, 0] > 0.2).astype(np.int64)
        table = make_table(X, y)
        params = train_logistic(table, LogisticConfig(l2_lambda=0.001))
        preds = (predict_logistic_proba(params, X) >= 0.5).astype(int)
        assert (preds == y).mean() > 0.95

    def test_gradient_small_at_optimum(self):
        rng = np.random.default_rng(7)
        table = random_batch(rng, 3, n_rows=60)
        config = LogisticConfig(l2_lambda=0.05, tolerance=1e-9, max_iter=500)
        params = train_logistic(table, config)
        grad = logistic_gradient(params, table.X, table.y.astype(float),
                                 config.l2_lambda)
        assert np.linalg.norm(grad.values) < 1e-4

    def test_l2_shrinks_weights(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(100, 2))
        y = (X[:, 0] > 0).astype(np.int64)
        table = make_table(X, y)
        loose = train_logistic(table, LogisticConfig(l2_lambda=1e-4))
        tight = train_logistic(table, LogisticConfig(l2_lambda=10.0))
        assert np.linalg.norm(tight.segment("weights")) < np.linalg.norm(
            loose.segment("weights")
        )

    def test_bias_not_penalized(self):
        # With only a bias active (constant features), heavy l2 still allows
        # the bias to match the class prior.
        table = make_table(np.zeros((40, 1)), [1] * 30 + [0] * 10)
        params = train_logistic(table, LogisticConfig(l2_lambda=100.0))
        prior = 0.75
        assert params.segment("bias")[0] == pytest.approx(
            math.log(prior / (1 - prior)), abs=1e-3
        )

    def test_init_layout_mismatch_rejected(self):
        table = make_table([[0.0], [1.0]], [0, 1])
        with pytest.raises(ModelError):
            train_logistic(table, init=zeros_logistic(3))

    def test_single_class_rejected(self):
        table = make_table([[0.0], [1.0]], [1, 1])
        with pytest.raises(DatasetError):
            train_logistic(table)


class TestSvm:
    def test_separable_data_fits(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(150, 2))
        y = ((X[:, 0] + X[:, 1]) > 0).astype(np.int64)
        table = make_table(X, y)
        params = train_svm(table, SvmConfig(degree=1, c=5.0, epochs=500))
        preds = (svm_decision(params, X, 1) >= 0).astype(int)
        assert (preds == y).mean() > 0.95

    def test_polynomial_boundary_learnable(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(300, 2))
        y = ((X[:, 0] ** 2 + X[:, 1] ** 2) < 1.0).astype(np.int64)
        table = make_table(X, y)
        params = train_svm(table, SvmConfig(degree=2, c=5.0, epochs=800))
        preds = (svm_decision(params, X, 2) >= 0).astype(int)
        assert (preds == y).mean() > 0.9

    def test_objective_improves_from_zero_init(self):
        rng = np.random.default_rng(11)
        table = random_batch(rng, 3, n_rows=80)
        config = SvmConfig(degree=2, c=1.0, epochs=200)
        zero = zeros_svm(3, 2)
        trained = train_svm(table, config)
        assert objective_of("svm", trained, table, config) < objective_of(
            "svm", zero, table, config
        )

    def test_boundary_classifies_positive(self):
        from fedchd.parametric import predict_svm

        params = ParamVector(np.zeros(poly_length(2, 1)), svm_layout(2, 1))
        assert predict_svm(params, np.array([1.0, 1.0]), 1) == 1

    def test_init_layout_mismatch_rejected(self):
        table = make_table([[0.0, 1.0], [1.0, 0.0]], [0, 1])
        with pytest.raises(ModelError):
            train_svm(table, SvmConfig(degree=2), init=zeros_svm(2, 3))


class TestNeuralNet:
    def test_layout_segments(self):
        layout = nn_layout(14, 16)
        assert layout == (("W1", 224), ("b1", 16), ("W2", 16), ("b2", 1))
        assert sum(k for _, k in layout) == 257

    def test_init_deterministic_and_bounded(self):
        a = init_nn_params(5, 4, seed=3)
        b = init_nn_params(5, 4, seed=3)
        np.testing.assert_array_equal(a.values, b.values)
        assert np.max(np.abs(a.segment("W1"))) <= 1.0 / math.sqrt(5)

    def test_forward_in_unit_interval(self):
        rng = np.random.default_rng(12)
        params = init_nn_params(3, 4, seed=0)
        proba = nn_forward(params, rng.normal(size=(50, 3)))
        assert np.all((proba > 0.0) & (proba < 1.0))

    def test_training_reduces_objective(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(200, 3))
        y = ((X[:, 0] - X[:, 2]) > 0).astype(np.int64)
        table = make_table(X, y)
        config = NeuralNetConfig(hidden_units=6, epochs=40, learning_rate=0.5, seed=1)
        init = init_nn_params(3, 6, seed=1)
        trained = train_nn(table, config, init)
        assert objective_of("nn", trained, table, config) < objective_of(
            "nn", init, table, config
        )

    def test_proximal_pull_shrinks_distance_to_reference(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(150, 3))
        y = (X[:, 1] > 0).astype(np.int64)
        table = make_table(X, y)
        ref = init_nn_params(3, 5, seed=9)
        distances = []
        # Keep learning_rate * prox_mu well below the SGD stability bound so
        # the proximal pull contracts instead of oscillating.
        for mu in (0.0, 0.5, 5.0):
            config = NeuralNetConfig(hidden_units=5, epochs=30, learning_rate=0.1,
                                     prox_mu=mu, seed=2)
            trained = train_nn(table, config, init=ref, global_ref=ref)
            distances.append(np.linalg.norm(trained.values - ref.values))
        assert distances[2] < distances[1] < distances[0]

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(15)
        table = random_batch(rng, 3, n_rows=64)
        config = NeuralNetConfig(hidden_units=4, epochs=5, seed=7)
        init = init_nn_params(3, 4, seed=7)
        a = train_nn(table, config, init)
        b = train_nn(table, config, init)
        np.testing.assert_array_equal(a.values, b.values)

    def test_global_ref_layout_mismatch_rejected(self):
        rng = np.random.default_rng(16)
        table = random_batch(rng, 3)
        config = NeuralNetConfig(hidden_units=4)
        with pytest.raises(ModelError):
            train_nn(table, config, init=init_nn_params(3, 4, 0),
                     global_ref=init_nn_params(3, 5, 0))


class TestParamVector:
    def test_layout_length_checked(self):
        with pytest.raises(ModelError):
            ParamVector(np.zeros(3), (("weights", 2),))

    def test_segment_lookup(self):
        pv = ParamVector(np.arange(5.0), (("a", 2), ("b", 3)))
        np.testing.assert_array_equal(pv.segment("b"), [2.0, 3.0, 4.0])
        with pytest.raises(ModelError):
            pv.segment("missing")

    def test_values_read_only(self):
        pv = ParamVector(np.zeros(2), (("a", 2),))
        with pytest.raises(ValueError):
            pv.values[0] = 1.0


class TestStandardizer:
    def test_zscores_continuous_columns(self):
        rng = np.random.default_rng(17)
        X = rng.normal(loc=5.0, scale=3.0, size=(500, 2))
        scaler = Standardizer.fit(X)
        Z = scaler.transform(X)
        np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(Z.std(axis=0), 1.0, atol=1e-9)

    def test_zero_spread_column_passes_through(self):
        X = np.column_stack([np.full(10, 4.0), np.arange(10.0)])
        scaler = Standardizer.fit(X)
        Z = scaler.transform(X)
        np.testing.assert_array_equal(Z[:, 0], np.zeros(10))

    def test_mean_of_scalers(self):
        a = Standardizer(mu=np.array([0.0, 2.0]), sigma=np.array([1.0, 2.0]))
        b = Standardizer(mu=np.array([4.0, 2.0]), sigma=np.array([3.0, 2.0]))
        merged = Standardizer.mean_of([a, b])
        np.testing.assert_array_equal(merged.mu, [2.0, 2.0])
        np.testing.assert_array_equal(merged.sigma, [2.0, 2.0])
