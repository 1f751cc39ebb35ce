import math

import numpy as np
import pytest

from fedchd.data import BINARY, CONTINUOUS, DataTable, DatasetError, FeatureSchema
from fedchd.trees import (
    FOREST_VOTE,
    WEIGHTED_VOTE,
    FeatureImportance,
    ForestConfig,
    GbtConfig,
    TreeEnsemble,
    TreeError,
    TreeNode,
    fit_cart,
    fit_gbt,
    fit_random_forest,
    fit_top_p_tree,
    forest_votes,
    gbt_feature_importance,
    gbt_log_loss,
    predict_forest_vote,
    predict_forest_vote_batch,
    predict_gbt,
    predict_gbt_proba,
    tree_apply,
    tree_feature_indices,
    tree_predict,
)


def make_schema(n_features: int) -> FeatureSchema:
    return FeatureSchema(
        names=tuple(f"x{i}" for i in range(n_features)),
        kinds=tuple(CONTINUOUS for _ in range(n_features)),
        label_name="label",
    )


def make_table(X, y) -> DataTable:
    X = np.asarray(X, dtype=np.float64)
    return DataTable(make_schema(X.shape[1]), X, np.asarray(y, dtype=np.int64))


def exhaustive_best_split(X, y):
    """Independent oracle: scan every feature and midpoint threshold with
    nested loops, minimizing the weighted Gini; ties break to the lowest
    feature index, then the lowest threshold."""
    n = len(y)
    best_score = math.inf
    best = None
    for f in range(X.shape[1]):
        for thr in midpoints(X[:, f]):
            mask = X[:, f] <= thr
            n_left = float(mask.sum())
            n_right = float(n - n_left)
            pos_left = float(y[mask].sum())
            pos_right = float(y.sum() - pos_left)
            p_l = pos_left / n_left
            q_l = (n_left - pos_left) / n_left
            p_r = pos_right / n_right
            q_r = (n_right - pos_right) / n_right
            gini_l = 1.0 - p_l * p_l - q_l * q_l
            gini_r = 1.0 - p_r * p_r - q_r * q_r
            weighted = (n_left * gini_l + n_right * gini_r) / n
            if weighted < best_score:
                best_score = weighted
                best = (f, thr)
    return best, best_score


def midpoints(column):
    values = np.unique(column)
    return [(a + b) / 2.0 for a, b in zip(values[:-1], values[1:])]


def random_table(rng, max_rows=12, max_features=3, integer_grid=True):
    n = int(rng.integers(2, max_rows + 1))
    d = int(rng.integers(1, max_features + 1))
    if integer_grid:
        X = rng.integers(0, 4, size=(n, d)).astype(np.float64)
    else:
        X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    return make_table(X, y)


class TestCartSplit:
    def test_root_split_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(42)
        checked = 0
        for trial in range(200):
            table = random_table(rng, integer_grid=(trial % 2 == 0))
            tree = fit_cart(table, max_depth=1)
            expected, _ = exhaustive_best_split(table.X, table.y)
            n_neg, n_pos = table.class_counts()
            if expected is None or n_neg == 0 or n_pos == 0:
                assert tree.is_leaf
                continue
            assert not tree.is_leaf
            assert (tree.feature_index, tree.threshold) == expected
            checked += 1
        assert checked > 100  # the generator must exercise real splits

    def test_pure_node_is_leaf(self):
        table = make_table([[0.0], [1.0], [2.0]], [1, 1, 1])
        tree = fit_cart(table, max_depth=5)
        assert tree.is_leaf
        assert tree.value == 1.0

    def test_constant_features_give_leaf(self):
        table = make_table([[3.0], [3.0], [3.0]], [0, 1, 0])
        tree = fit_cart(table, max_depth=5)
        assert tree.is_leaf
        assert tree.value == pytest.approx(1 / 3)

    def test_max_depth_zero_gives_single_leaf(self):
        table = make_table([[0.0], [1.0]], [0, 1])
        tree = fit_cart(table, max_depth=0)
        assert tree.is_leaf
        assert tree.value == 0.5

    def test_max_depth_respected(self):
        rng = np.random.default_rng(1)
        table = make_table(rng.normal(size=(60, 3)), rng.integers(0, 2, 60))
        for depth in (1, 2, 3):
            assert fit_cart(table, max_depth=depth).depth() <= depth

    def test_min_samples_split_blocks_small_nodes(self):
        table = make_table([[0.0], [1.0], [2.0], [3.0]], [0, 1, 0, 1])
        tree = fit_cart(table, max_depth=5, min_samples_split=5)
        assert tree.is_leaf

    def test_unique_rows_fit_perfectly_at_large_depth(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(40, 4))
        y = rng.integers(0, 2, 40)
        table = make_table(X, y)
        tree = fit_cart(table, max_depth=30)
        predictions = (tree_apply(tree, X) >= 0.5).astype(int)
        np.testing.assert_array_equal(predictions, y)

    def test_feature_subset_restricts_splits(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(80, 4))
        y = (X[:, 2] > 0).astype(np.int64)  # feature 2 is the signal
        table = make_table(X, y)
        tree = fit_cart(table, max_depth=4, feature_subset=[0, 1])
        assert tree_feature_indices(tree) <= {0, 1}

    def test_out_of_range_subset_rejected(self):
        table = make_table([[0.0], [1.0]], [0, 1])
        with pytest.raises(TreeError):
            fit_cart(table, feature_subset=[3])

    def test_empty_table_rejected(self):
        schema = make_schema(1)
        with pytest.raises(DatasetError):
            fit_cart(DataTable(schema, np.empty((0, 1)), np.empty(0, dtype=np.int64)))

    def test_tree_apply_matches_scalar_predict(self):
        rng = np.random.default_rng(4)
        table = make_table(rng.normal(size=(50, 3)), rng.integers(0, 2, 50))
        tree = fit_cart(table, max_depth=6)
        X_new = rng.normal(size=(20, 3))
        batch = tree_apply(tree, X_new)
        scalar = [tree_predict(tree, x) for x in X_new]
        np.testing.assert_array_equal(batch, scalar)


class TestForest:
    def test_vote_matches_brute_force_tally(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            table = make_table(rng.normal(size=(40, 3)), rng.integers(0, 2, 40))
            forest = fit_random_forest(
                table, ForestConfig(n_trees=int(rng.integers(1, 9)), max_depth=3, seed=7)
            )
            X_new = rng.normal(size=(200, 3))
            batch = predict_forest_vote_batch(forest, X_new)
            for i, x in enumerate(X_new):
                ones = sum(
                    1 for t in forest.trees if tree_predict(t, x) >= 0.5
                )
                expected = 1 if 2 * ones >= len(forest.trees) else 0
                assert batch[i] == expected
                assert predict_forest_vote(forest, x) == expected

    def test_exact_tie_predicts_positive(self):
        zero = TreeNode(value=0.0)
        one = TreeNode(value=1.0)
        forest = TreeEnsemble(trees=(zero, one), kind=FOREST_VOTE)
        assert predict_forest_vote(forest, np.array([0.0])) == 1

    def test_forest_is_deterministic(self):
        rng = np.random.default_rng(2)
        table = make_table(rng.normal(size=(60, 3)), rng.integers(0, 2, 60))
        config = ForestConfig(n_trees=10, max_depth=4, seed=5)
        X_new = rng.normal(size=(30, 3))
        first = predict_forest_vote_batch(fit_random_forest(table, config), X_new)
        second = predict_forest_vote_batch(fit_random_forest(table, config), X_new)
        np.testing.assert_array_equal(first, second)

    def test_tree_count_and_votes_shape(self):
        rng = np.random.default_rng(6)
        table = make_table(rng.normal(size=(30, 2)), rng.integers(0, 2, 30))
        forest = fit_random_forest(table, ForestConfig(n_trees=13, max_depth=2))
        assert len(forest.trees) == 13
        votes = forest_votes(forest, table.X)
        assert votes.shape == (13, 30)
        assert set(np.unique(votes)) <= {0, 1}

    def test_no_bootstrap_no_subsample_reduces_to_cart(self):
        rng = np.random.default_rng(8)
        table = make_table(rng.normal(size=(50, 3)), rng.integers(0, 2, 50))
        config = ForestConfig(
            n_trees=3, max_depth=4, feature_subsample=None, bootstrap=False
        )
        forest = fit_random_forest(table, config)
        reference = fit_cart(table, max_depth=4)
        for tree in forest.trees:
            np.testing.assert_array_equal(
                tree_apply(tree, table.X), tree_apply(reference, table.X)
            )

    def test_empty_ensemble_rejected(self):
        with pytest.raises(TreeError):
            predict_forest_vote(
                TreeEnsemble(trees=(), kind=FOREST_VOTE), np.array([0.0])
            )


class TestGbt:
    def test_hand_computed_first_tree(self):
        # Two rows, one feature, balanced labels: prior log-odds 0, gradients
        # (0.5, -0.5), hessians 0.25. With reg_lambda=1 the only split gives
        # gain 0.2 and leaf weights -0.4 / +0.4.
        table = make_table([[0.0], [1.0]], [0, 1])
        config = GbtConfig(n_rounds=1, learning_rate=0.1, max_depth=2,
                           reg_lambda=1.0, min_child_weight=0.0)
        ensemble = fit_gbt(table, config)
        assert ensemble.base_score == 0.0
        tree = ensemble.trees[0]
        assert not tree.is_leaf
        assert tree.threshold == 0.5
        assert tree.gain == pytest.approx(0.2)
        assert tree.left.value == pytest.approx(-0.4)
        assert tree.right.value == pytest.approx(0.4)
        proba = predict_gbt_proba(ensemble, table.X)
        assert proba[0] == pytest.approx(1.0 / (1.0 + math.exp(0.04)))

    def test_base_score_is_log_odds_prior(self):
        table = make_table([[float(i)] for i in range(10)], [1] + [0] * 9)
        ensemble = fit_gbt(table, GbtConfig(n_rounds=1))
        assert ensemble.base_score == pytest.approx(math.log(0.1 / 0.9))

    def test_log_loss_non_increasing_over_rounds(self):
        for seed in (1, 2, 3):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(80, 4))
            y = ((X[:, 0] + 0.5 * X[:, 1]) > 0).astype(np.int64)
            if y.min() == y.max():
                continue
            table = make_table(X, y)
            config = GbtConfig(n_rounds=0, learning_rate=0.3, max_depth=3,
                               min_child_weight=0.0)
            losses = []
            for rounds in range(1, 11):
                ensemble = fit_gbt(table, GbtConfig(
                    n_rounds=rounds, learning_rate=0.3, max_depth=3,
                    min_child_weight=0.0))
                losses.append(gbt_log_loss(ensemble, table))
            for earlier, later in zip(losses[:-1], losses[1:]):
                assert later <= earlier + 1e-12

    def test_max_depth_respected(self):
        rng = np.random.default_rng(5)
        table = make_table(rng.normal(size=(100, 3)), rng.integers(0, 2, 100))
        ensemble = fit_gbt(table, GbtConfig(n_rounds=5, max_depth=2))
        assert all(t.depth() <= 2 for t in ensemble.trees)

    def test_min_child_weight_blocks_thin_splits(self):
        # Hessians are at most 0.25 per row, so two rows cannot clear an
        # min_child_weight of 1.0 on either side.
        table = make_table([[0.0], [1.0]], [0, 1])
        ensemble = fit_gbt(table, GbtConfig(n_rounds=1, min_child_weight=1.0))
        assert ensemble.trees[0].is_leaf

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(60, 3))
        y = rng.integers(0, 2, 60)
        table = make_table(X, y)
        a = fit_gbt(table, GbtConfig(n_rounds=8))
        b = fit_gbt(table, GbtConfig(n_rounds=8))
        np.testing.assert_array_equal(
            predict_gbt_proba(a, X), predict_gbt_proba(b, X)
        )

    def test_single_class_rejected(self):
        table = make_table([[0.0], [1.0]], [1, 1])
        with pytest.raises(DatasetError):
            fit_gbt(table, GbtConfig(n_rounds=1))

    def test_scalar_predict_matches_batch(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(40, 2))
        y = rng.integers(0, 2, 40)
        ensemble = fit_gbt(make_table(X, y), GbtConfig(n_rounds=4))
        batch = predict_gbt_proba(ensemble, X)
        for i, x in enumerate(X):
            assert predict_gbt(ensemble, x) == pytest.approx(batch[i])


class TestImportance:
    def walk_gains(self, node, acc):
        if node.is_leaf:
            return
        acc.append((node.feature_index, node.gain))
        self.walk_gains(node.left, acc)
        self.walk_gains(node.right, acc)

    def test_scores_conserve_total_gain(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(120, 5))
        y = ((X[:, 1] - X[:, 3]) > 0).astype(np.int64)
        ensemble = fit_gbt(make_table(X, y), GbtConfig(n_rounds=10, max_depth=3))
        importance = gbt_feature_importance(ensemble)
        gains = []
        for tree in ensemble.trees:
            self.walk_gains(tree, gains)
        assert importance.scores.sum() == pytest.approx(
            sum(g for _, g in gains)
        )
        for feature in range(5):
            expected = sum(g for f, g in gains if f == feature)
            assert importance.scores[feature] == pytest.approx(expected)

    def test_ranking_descends_with_index_tiebreak(self):
        importance = FeatureImportance.from_scores(
            np.array([1.0, 3.0, 3.0, 0.0, 2.0])
        )
        assert list(importance.ranking) == [1, 2, 4, 0, 3]

    def test_informative_feature_ranks_first(self):
        rng = np.random.default_rng(30)
        X = rng.normal(size=(200, 4))
        y = (X[:, 2] > 0).astype(np.int64)
        ensemble = fit_gbt(make_table(X, y), GbtConfig(n_rounds=10, max_depth=2))
        importance = gbt_feature_importance(ensemble)
        assert importance.ranking[0] == 2


class TestTopPTree:
    def test_uses_only_top_p_features(self):
        rng = np.random.default_rng(40)
        X = rng.normal(size=(150, 6))
        y = ((X[:, 0] + X[:, 5]) > 0).astype(np.int64)
        table = make_table(X, y)
        ensemble = fit_gbt(table, GbtConfig(n_rounds=10, max_depth=3))
        importance = gbt_feature_importance(ensemble)
        shallow = fit_top_p_tree(table, importance, p=2, max_depth=4)
        assert tree_feature_indices(shallow) <= set(importance.ranking[:2])

    def test_full_p_equals_unrestricted_cart(self):
        rng = np.random.default_rng(41)
        X = rng.normal(size=(80, 3))
        y = rng.integers(0, 2, 80)
        table = make_table(X, y)
        ensemble = fit_gbt(table, GbtConfig(n_rounds=5, max_depth=3))
        importance = gbt_feature_importance(ensemble)
        restricted = fit_top_p_tree(table, importance, p=3, max_depth=4)
        free = fit_cart(table, max_depth=4)
        np.testing.assert_array_equal(
            tree_apply(restricted, X), tree_apply(free, X)
        )

    def test_invalid_p_rejected(self):
        table = make_table([[0.0], [1.0]], [0, 1])
        importance = FeatureImportance.from_scores(np.array([1.0]))
        with pytest.raises(TreeError):
            fit_top_p_tree(table, importance, p=0)
        with pytest.raises(TreeError):
            fit_top_p_tree(table, importance, p=2)


class TestEnsembleValidation:
    def test_weights_only_for_weighted_vote(self):
        leaf = TreeNode(value=1.0)
        with pytest.raises(TreeError):
            TreeEnsemble(trees=(leaf,), kind=FOREST_VOTE, weights=np.array([1.0]))
        with pytest.raises(TreeError):
            TreeEnsemble(trees=(leaf,), kind=WEIGHTED_VOTE)

    def test_weights_must_sum_to_one(self):
        leaf = TreeNode(value=1.0)
        with pytest.raises(TreeError):
            TreeEnsemble(
                trees=(leaf, leaf), kind=WEIGHTED_VOTE, weights=np.array([0.7, 0.7])
            )

    def test_unknown_kind_rejected(self):
        with pytest.raises(TreeError):
            TreeEnsemble(trees=(), kind="mystery")
