"""Canonical byte encodings for everything that crosses the client-server
boundary.

All integers are little-endian. Real values are 8-byte IEEE float64.
Trees serialize in preorder: internal node = flag 0x01 + uint32 feature +
float64 threshold (13 bytes); leaf = flag 0x00 + float64 value (9 bytes).
An ensemble is a uint32 tree count, the trees back to back, then one
float64 weight per tree iff the ensemble is a weighted vote.

A transport frame wraps any payload as 1 payload-kind byte + uint32 body
length + body. Ledger byte counts use the bare body so they match the
canonical sizes quoted in reports.
"""

from __future__ import annotations

import struct

import numpy as np

from .data import ClassStats
from .parametric import ParamVector
from .trees import (
    TreeEnsemble,
    TreeNode,
    WEIGHTED_VOTE,
)


class WireError(ValueError):
    pass


KIND_PARAMS = 1
KIND_TREE = 2
KIND_ENSEMBLE = 3
KIND_CLASS_STATS = 4
_KNOWN_KINDS = (KIND_PARAMS, KIND_TREE, KIND_ENSEMBLE, KIND_CLASS_STATS)

_U32 = struct.Struct("<I")
_F64 = struct.Struct("<d")
_INTERNAL = struct.Struct("<BId")
_LEAF = struct.Struct("<Bd")

_FLAG_LEAF = 0x00
_FLAG_INTERNAL = 0x01


# ---------------------------------------------------------------------------
# ParamVector
# ---------------------------------------------------------------------------

def encode_params(params: ParamVector) -> bytes:
    return np.asarray(params.values, dtype="<f8").tobytes()


def decode_params(data: bytes, layout) -> ParamVector:
    layout = tuple((str(name), int(length)) for name, length in layout)
    expected = 8 * sum(length for _, length in layout)
    if len(data) != expected:
        raise WireError(
            f"parameter payload is {len(data)} bytes, layout needs {expected}"
        )
    values = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return ParamVector(values=values, layout=layout)


# ---------------------------------------------------------------------------
# Trees and ensembles
# ---------------------------------------------------------------------------

def encode_tree(node: TreeNode) -> bytes:
    parts = []

    def visit(nd: TreeNode):
        if nd.is_leaf:
            parts.append(_LEAF.pack(_FLAG_LEAF, nd.value))
        else:
            parts.append(_INTERNAL.pack(_FLAG_INTERNAL, nd.feature_index,
                                        nd.threshold))
            visit(nd.left)
            visit(nd.right)

    visit(node)
    return b"".join(parts)


def _decode_tree_at(data: bytes, offset: int) -> tuple[TreeNode, int]:
    if offset >= len(data):
        raise WireError("tree payload truncated")
    flag = data[offset]
    if flag == _FLAG_LEAF:
        if offset + _LEAF.size > len(data):
            raise WireError("tree payload truncated inside a leaf")
        (_, value) = _LEAF.unpack_from(data, offset)
        return TreeNode(value=value), offset + _LEAF.size
    if flag == _FLAG_INTERNAL:
        if offset + _INTERNAL.size > len(data):
            raise WireError("tree payload truncated inside an internal node")
        (_, feature, threshold) = _INTERNAL.unpack_from(data, offset)
        left, offset = _decode_tree_at(data, offset + _INTERNAL.size)
        right, offset = _decode_tree_at(data, offset)
        return (
            TreeNode(feature_index=feature, threshold=threshold,
                     left=left, right=right),
            offset,
        )
    raise WireError(f"unknown tree node flag 0x{flag:02x}")


def decode_tree(data: bytes) -> TreeNode:
    node, offset = _decode_tree_at(bytes(data), 0)
    if offset != len(data):
        raise WireError(f"{len(data) - offset} trailing bytes after tree")
    return node


def encode_ensemble(ensemble: TreeEnsemble) -> bytes:
    parts = [_U32.pack(len(ensemble.trees))]
    parts.extend(encode_tree(t) for t in ensemble.trees)
    if ensemble.kind == WEIGHTED_VOTE:
        parts.append(np.asarray(ensemble.weights, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_ensemble(
    data: bytes,
    kind: str,
    base_score: float = 0.0,
    learning_rate: float = 1.0,
    n_features: int = 0,
) -> TreeEnsemble:
    """Rebuild an ensemble. The combination rule and boosting constants are
    protocol-level metadata, not part of the byte stream, so the caller
    supplies them."""
    data = bytes(data)
    if len(data) < _U32.size:
        raise WireError("ensemble payload truncated")
    (count,) = _U32.unpack_from(data, 0)
    offset = _U32.size
    trees = []
    for _ in range(count):
        tree, offset = _decode_tree_at(data, offset)
        trees.append(tree)
    weights = None
    if kind == WEIGHTED_VOTE:
        need = 8 * count
        if len(data) - offset < need:
            raise WireError("ensemble payload missing vote weights")
        weights = np.frombuffer(data, dtype="<f8", count=count,
                                offset=offset).astype(np.float64)
        offset += need
    if offset != len(data):
        raise WireError(f"{len(data) - offset} trailing bytes after ensemble")
    return TreeEnsemble(
        trees=tuple(trees),
        kind=kind,
        weights=weights,
        base_score=base_score,
        learning_rate=learning_rate,
        n_features=n_features,
    )


# ---------------------------------------------------------------------------
# Minority-class statistics
# ---------------------------------------------------------------------------

def encode_class_stats(stats: ClassStats) -> bytes:
    d = stats.mu.size
    return b"".join(
        (
            _U32.pack(d),
            np.asarray(stats.mu, dtype="<f8").tobytes(),
            np.asarray(stats.sigma2, dtype="<f8").tobytes(),
            _U32.pack(stats.n_minority),
            _U32.pack(stats.n_majority),
        )
    )


def decode_class_stats(data: bytes) -> ClassStats:
    data = bytes(data)
    if len(data) < _U32.size:
        raise WireError("class-stats payload truncated")
    (d,) = _U32.unpack_from(data, 0)
    expected = _U32.size + 16 * d + 2 * _U32.size
    if len(data) != expected:
        raise WireError(
            f"class-stats payload is {len(data)} bytes, expected {expected}"
        )
    offset = _U32.size
    mu = np.frombuffer(data, dtype="<f8", count=d, offset=offset).astype(np.float64)
    offset += 8 * d
    sigma2 = np.frombuffer(data, dtype="<f8", count=d, offset=offset).astype(np.float64)
    offset += 8 * d
    (n_minority,) = _U32.unpack_from(data, offset)
    (n_majority,) = _U32.unpack_from(data, offset + _U32.size)
    return ClassStats(mu=mu, sigma2=sigma2, n_minority=n_minority,
                      n_majority=n_majority)


# ---------------------------------------------------------------------------
# Transport frames and ledger sizing
# ---------------------------------------------------------------------------

def encode_payload(payload) -> tuple[int, bytes]:
    """(payload kind, canonical body bytes) for any wire-legal object."""
    if isinstance(payload, ParamVector):
        return KIND_PARAMS, encode_params(payload)
    if isinstance(payload, TreeNode):
        return KIND_TREE, encode_tree(payload)
    if isinstance(payload, TreeEnsemble):
        return KIND_ENSEMBLE, encode_ensemble(payload)
    if isinstance(payload, ClassStats):
        return KIND_CLASS_STATS, encode_class_stats(payload)
    raise WireError(f"cannot serialize {type(payload).__name__} objects")


def frame(payload) -> bytes:
    kind, body = encode_payload(payload)
    return bytes([kind]) + _U32.pack(len(body)) + body


def unframe(data: bytes) -> tuple[int, bytes]:
    data = bytes(data)
    if len(data) < 1 + _U32.size:
        raise WireError("frame truncated")
    kind = data[0]
    if kind not in _KNOWN_KINDS:
        raise WireError(f"unknown payload kind byte 0x{kind:02x}")
    (length,) = _U32.unpack_from(data, 1)
    body = data[1 + _U32.size:]
    if len(body) != length:
        raise WireError(f"frame length {length} does not match body {len(body)}")
    return kind, body


def ledger_bytes(payload) -> int:
    """Canonical body size in bytes, excluding the 5-byte frame header."""
    _, body = encode_payload(payload)
    return len(body)
