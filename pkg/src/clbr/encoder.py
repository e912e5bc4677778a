"""Linear graph encoder with mean-of-layers combination and its adjoint.

The embedding table is the only trainable parameter, so the encoder is a
fixed linear map ``X -> mean(X, AX, ..., A^L X)``. Because ``A`` is
symmetric the same map is its own adjoint, which gives exact gradients
without autodiff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NodeSpace


@dataclass(frozen=True)
class EmbeddingTable:
    space: NodeSpace
    weights: np.ndarray

    def __post_init__(self):
        w = self.weights
        if w.ndim != 2 or w.shape[0] != self.space.num_nodes or w.shape[1] < 1:
            raise ValueError(f"embedding table shape {w.shape} does not fit {self.space.num_nodes} nodes")
        if not np.isfinite(w).all():
            raise ValueError("embedding table has non-finite entries")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def gaussian(cls, space: NodeSpace, dim: int = 64, rng=None, std: float = 0.1) -> "EmbeddingTable":
        rng = np.random.default_rng(rng)
        return cls(space, rng.normal(0.0, std, size=(space.num_nodes, dim)))

    def block(self, node_type: str) -> np.ndarray:
        o = self.space.offset(node_type)
        return self.weights[o:o + self.space.count(node_type)]


@dataclass(frozen=True)
class PropagatedEmbeddings:
    space: NodeSpace
    table: np.ndarray
    layers: int

    @property
    def users(self) -> np.ndarray:
        return self.block("user")

    @property
    def items(self) -> np.ndarray:
        return self.block("item")

    @property
    def bundles(self) -> np.ndarray:
        return self.block("bundle")

    def block(self, node_type: str) -> np.ndarray:
        o = self.space.offset(node_type)
        return self.table[o:o + self.space.count(node_type)]


def _mean_of_powers(x: np.ndarray, op, layers: int) -> np.ndarray:
    if layers < 0:
        raise ValueError(f"layers must be >= 0, got {layers}")
    if op.shape[0] != x.shape[0] or op.shape[1] != x.shape[0]:
        raise ValueError(f"operator shape {op.shape} does not match {x.shape[0]} rows")
    acc = x.copy()
    cur = x
    for _ in range(layers):
        cur = op @ cur
        acc += cur
    return acc / (layers + 1)


def propagate_table(x: np.ndarray, op, layers: int) -> np.ndarray:
    return _mean_of_powers(np.asarray(x, dtype=np.float64), op, layers)


def propagate(params: EmbeddingTable, op, layers: int) -> PropagatedEmbeddings:
    return PropagatedEmbeddings(params.space, propagate_table(params.weights, op, layers), layers)


def backpropagate(grad_out: np.ndarray, op, layers: int) -> np.ndarray:
    # op is symmetric, so the adjoint of mean(A^l) is itself
    return _mean_of_powers(np.asarray(grad_out, dtype=np.float64), op, layers)


def predict_score(u_emb, b_emb) -> float:
    return float(np.dot(u_emb, b_emb))


def row_normalize(block: np.ndarray) -> np.ndarray:
    """Scale each nonzero row to unit L2 norm; zero rows stay zero."""
    block = np.asarray(block, dtype=np.float64)
    norms = np.linalg.norm(block, axis=1, keepdims=True)
    return np.divide(block, norms, out=np.zeros_like(block), where=norms > 0)
