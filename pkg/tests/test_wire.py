import numpy as np
import pytest

from fedchd.data import ClassStats
from fedchd.parametric import ParamVector
from fedchd.trees import BOOSTED_SUM, FOREST_VOTE, WEIGHTED_VOTE, TreeEnsemble, TreeNode
from fedchd.wire import (
    KIND_CLASS_STATS,
    KIND_ENSEMBLE,
    KIND_PARAMS,
    KIND_TREE,
    WireError,
    decode_class_stats,
    decode_ensemble,
    decode_params,
    decode_tree,
    encode_class_stats,
    encode_ensemble,
    encode_params,
    encode_tree,
    frame,
    ledger_bytes,
    unframe,
)


def random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        return TreeNode(value=float(rng.normal()))
    return TreeNode(
        feature_index=int(rng.integers(0, 14)),
        threshold=float(rng.normal()),
        left=random_tree(rng, depth - 1),
        right=random_tree(rng, depth - 1),
    )


def trees_equal(a: TreeNode, b: TreeNode) -> bool:
    if a.is_leaf != b.is_leaf:
        return False
    if a.is_leaf:
        return a.value == b.value
    return (
        a.feature_index == b.feature_index
        and a.threshold == b.threshold
        and trees_equal(a.left, b.left)
        and trees_equal(a.right, b.right)
    )


class TestParamEncoding:
    def test_hundred_values_is_800_bytes(self):
        pv = ParamVector(np.arange(100.0), (("weights", 100),))
        assert ledger_bytes(pv) == 800

    def test_roundtrip_preserves_values_and_layout(self):
        rng = np.random.default_rng(0)
        layout = (("W1", 12), ("b1", 3), ("W2", 3), ("b2", 1))
        pv = ParamVector(rng.normal(size=19), layout)
        back = decode_params(encode_params(pv), layout)
        assert back.layout == pv.layout
        np.testing.assert_array_equal(back.values, pv.values)

    def test_length_mismatch_rejected(self):
        with pytest.raises(WireError):
            decode_params(b"\0" * 16, (("weights", 3),))


class TestTreeEncoding:
    def test_single_leaf_is_9_bytes(self):
        assert ledger_bytes(TreeNode(value=0.25)) == 9

    def test_depth_one_tree_is_31_bytes(self):
        tree = TreeNode(
            feature_index=4,
            threshold=1.5,
            left=TreeNode(value=0.0),
            right=TreeNode(value=1.0),
        )
        assert ledger_bytes(tree) == 13 + 9 + 9

    def test_internal_node_field_sizes(self):
        tree = TreeNode(
            feature_index=7,
            threshold=2.5,
            left=TreeNode(value=0.5),
            right=TreeNode(value=0.75),
        )
        data = encode_tree(tree)
        assert data[0] == 0x01
        assert int.from_bytes(data[1:5], "little") == 7
        assert np.frombuffer(data[5:13], dtype="<f8")[0] == 2.5
        assert data[13] == 0x00

    def test_random_roundtrips(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            tree = random_tree(rng, 5)
            assert trees_equal(decode_tree(encode_tree(tree)), tree)

    def test_truncated_rejected(self):
        data = encode_tree(random_tree(np.random.default_rng(1), 3))
        with pytest.raises(WireError):
            decode_tree(data[:-1])

    def test_trailing_bytes_rejected(self):
        data = encode_tree(TreeNode(value=0.5))
        with pytest.raises(WireError):
            decode_tree(data + b"\0")

    def test_unknown_flag_rejected(self):
        with pytest.raises(WireError):
            decode_tree(b"\x07" + b"\0" * 8)


class TestEnsembleEncoding:
    def test_forest_roundtrip(self):
        rng = np.random.default_rng(2)
        ensemble = TreeEnsemble(
            trees=tuple(random_tree(rng, 4) for _ in range(7)),
            kind=FOREST_VOTE,
            n_features=14,
        )
        back = decode_ensemble(encode_ensemble(ensemble), FOREST_VOTE, n_features=14)
        assert len(back.trees) == 7
        assert all(trees_equal(a, b) for a, b in zip(ensemble.trees, back.trees))

    def test_weighted_roundtrip_keeps_weights(self):
        rng = np.random.default_rng(3)
        weights = np.array([0.5, 0.3, 0.2])
        ensemble = TreeEnsemble(
            trees=tuple(random_tree(rng, 3) for _ in range(3)),
            kind=WEIGHTED_VOTE,
            weights=weights,
        )
        back = decode_ensemble(encode_ensemble(ensemble), WEIGHTED_VOTE)
        np.testing.assert_array_equal(back.weights, weights)

    def test_boosted_metadata_passes_through(self):
        rng = np.random.default_rng(4)
        ensemble = TreeEnsemble(
            trees=tuple(random_tree(rng, 3) for _ in range(4)),
            kind=BOOSTED_SUM,
            base_score=-1.7,
            learning_rate=0.1,
        )
        back = decode_ensemble(
            encode_ensemble(ensemble), BOOSTED_SUM, base_score=-1.7, learning_rate=0.1
        )
        assert back.base_score == -1.7
        assert back.learning_rate == 0.1

    def test_size_is_count_prefix_plus_trees(self):
        leafs = tuple(TreeNode(value=0.0) for _ in range(5))
        ensemble = TreeEnsemble(trees=leafs, kind=FOREST_VOTE)
        assert ledger_bytes(ensemble) == 4 + 5 * 9

    def test_weighted_size_adds_8_per_tree(self):
        leafs = tuple(TreeNode(value=0.0) for _ in range(4))
        ensemble = TreeEnsemble(
            trees=leafs, kind=WEIGHTED_VOTE, weights=np.full(4, 0.25)
        )
        assert ledger_bytes(ensemble) == 4 + 4 * 9 + 4 * 8

    def test_missing_weights_rejected(self):
        leafs = tuple(TreeNode(value=0.0) for _ in range(2))
        plain = encode_ensemble(TreeEnsemble(trees=leafs, kind=FOREST_VOTE))
        with pytest.raises(WireError):
            decode_ensemble(plain, WEIGHTED_VOTE)


class TestClassStatsEncoding:
    def test_roundtrip(self):
        stats = ClassStats(
            mu=np.array([1.0, -2.0, 0.5]),
            sigma2=np.array([0.2, 0.0, 3.0]),
            n_minority=17,
            n_majority=113,
        )
        back = decode_class_stats(encode_class_stats(stats))
        np.testing.assert_array_equal(back.mu, stats.mu)
        np.testing.assert_array_equal(back.sigma2, stats.sigma2)
        assert back.n_minority == 17
        assert back.n_majority == 113

    def test_size_is_counts_plus_two_vectors(self):
        stats = ClassStats(np.zeros(14), np.ones(14), 3, 5)
        assert ledger_bytes(stats) == 4 + 14 * 8 * 2 + 8

    def test_wrong_length_rejected(self):
        stats = ClassStats(np.zeros(2), np.ones(2), 1, 1)
        with pytest.raises(WireError):
            decode_class_stats(encode_class_stats(stats)[:-2])


class TestFraming:
    def test_frame_layout_and_roundtrip(self):
        pv = ParamVector(np.array([1.0, 2.0]), (("weights", 2),))
        data = frame(pv)
        assert data[0] == KIND_PARAMS
        assert int.from_bytes(data[1:5], "little") == 16
        kind, body = unframe(data)
        assert kind == KIND_PARAMS
        np.testing.assert_array_equal(
            decode_params(body, pv.layout).values, pv.values
        )

    def test_every_kind_byte_is_distinct(self):
        assert len({KIND_PARAMS, KIND_TREE, KIND_ENSEMBLE, KIND_CLASS_STATS}) == 4

    def test_frame_length_checked(self):
        pv = ParamVector(np.array([1.0]), (("weights", 1),))
        with pytest.raises(WireError):
            unframe(frame(pv) + b"\0")

    def test_unknown_kind_rejected(self):
        with pytest.raises(WireError):
            unframe(b"\x99" + (5).to_bytes(4, "little") + b"\0" * 5)

    def test_unsupported_payload_type_rejected(self):
        with pytest.raises(WireError):
            ledger_bytes("not a payload")
