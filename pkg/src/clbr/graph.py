"""Tripartite user-bundle-item graph and its normalized propagation operator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GraphError


class RelationKind(str, enum.Enum):
    UB = "ub"
    UI = "ui"
    BI = "bi"

    @property
    def endpoints(self) -> tuple[str, str]:
        return _ENDPOINTS[self]


_ENDPOINTS = {
    RelationKind.UB: ("user", "bundle"),
    RelationKind.UI: ("user", "item"),
    RelationKind.BI: ("bundle", "item"),
}

RELATIONS = (RelationKind.UB, RelationKind.UI, RelationKind.BI)


@dataclass(frozen=True)
class NodeSpace:
    num_users: int
    num_items: int
    num_bundles: int

    def __post_init__(self):
        for name in ("num_users", "num_items", "num_bundles"):
            if int(getattr(self, name)) < 1:
                raise GraphError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items + self.num_bundles

    def count(self, node_type: str) -> int:
        return {"user": self.num_users, "item": self.num_items, "bundle": self.num_bundles}[node_type]

    def offset(self, node_type: str) -> int:
        # global layout: users, items, bundles
        return {"user": 0, "item": self.num_users, "bundle": self.num_users + self.num_items}[node_type]

    def shape(self, kind: RelationKind) -> tuple[int, int]:
        src, dst = kind.endpoints
        return self.count(src), self.count(dst)


def _as_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphError(f"edge list must have shape (m, 2), got {arr.shape}")
    return arr


class EdgeSet:
    """Deduplicated, lexicographically sorted pairs of one relation."""

    __slots__ = ("kind", "shape", "pairs", "keys")

    def __init__(self, kind: RelationKind, shape: tuple[int, int], pairs=()):
        self.kind = RelationKind(kind)
        self.shape = (int(shape[0]), int(shape[1]))
        arr = _as_pairs(pairs)
        n_src, n_dst = self.shape
        bad = (arr[:, 0] < 0) | (arr[:, 0] >= n_src) | (arr[:, 1] < 0) | (arr[:, 1] >= n_dst)
        if bad.any():
            s, d = arr[np.argmax(bad)]
            raise GraphError(
                f"relation {self.kind.value}: pair ({s}, {d}) out of bounds for "
                f"{self.kind.endpoints[0]}s [0,{n_src}) x {self.kind.endpoints[1]}s [0,{n_dst})"
            )
        keys = np.unique(arr[:, 0] * n_dst + arr[:, 1])
        self.keys = keys
        self.pairs = np.stack([keys // n_dst, keys % n_dst], axis=1) if len(keys) else np.empty((0, 2), np.int64)
        self.keys.setflags(write=False)
        self.pairs.setflags(write=False)

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self):
        return (tuple(p) for p in self.pairs.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return self.kind == other.kind and self.shape == other.shape and np.array_equal(self.keys, other.keys)

    def encode(self, pairs) -> np.ndarray:
        arr = _as_pairs(pairs)
        return arr[:, 0] * self.shape[1] + arr[:, 1]

    def contains(self, pairs) -> np.ndarray:
        """Boolean membership mask for an (m, 2) array of pairs."""
        keys = self.encode(pairs)
        if len(self.keys) == 0:
            return np.zeros(len(keys), dtype=bool)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == keys

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        n_src, n_dst = self.shape
        return (
            np.bincount(self.pairs[:, 0], minlength=n_src),
            np.bincount(self.pairs[:, 1], minlength=n_dst),
        )


@dataclass(frozen=True, eq=False)
class ViewDelta:
    """Edges added to / dropped from each relation of a factual graph."""

    added: dict = field(default_factory=dict)
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        for store in (self.added, self.dropped):
            for kind in RELATIONS:
                store[kind] = _as_pairs(store.get(kind, ()))

    def inverse(self) -> "ViewDelta":
        return ViewDelta(added=dict(self.dropped), dropped=dict(self.added))

    def size(self, kind: RelationKind) -> tuple[int, int]:
        return len(self.added[kind]), len(self.dropped[kind])

    def is_empty(self) -> bool:
        return all(len(self.added[k]) == 0 and len(self.dropped[k]) == 0 for k in RELATIONS)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ViewDelta):
            return NotImplemented
        return all(
            np.array_equal(_canonical(self.added[k]), _canonical(other.added[k]))
            and np.array_equal(_canonical(self.dropped[k]), _canonical(other.dropped[k]))
            for k in RELATIONS
        )


def _canonical(pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return pairs
    return np.unique(pairs, axis=0)


class TripartiteGraph:
    """Immutable heterogeneous graph over users, items and bundles."""

    def __init__(self, space: NodeSpace, edges: dict):
        self.space = space
        self.edges = {kind: edges[kind] for kind in RELATIONS}
        self.degrees = {kind: self.edges[kind].degrees() for kind in RELATIONS}
        total = np.zeros(space.num_nodes, dtype=np.int64)
        for kind in RELATIONS:
            src, dst = kind.endpoints
            src_deg, dst_deg = self.degrees[kind]
            o = space.offset(src)
            total[o:o + len(src_deg)] += src_deg
            o = space.offset(dst)
            total[o:o + len(dst_deg)] += dst_deg
        total.setflags(write=False)
        self.total_degree = total
        self._adjacency = None

    def __repr__(self) -> str:
        s = self.space
        counts = ", ".join(f"|E_{k.value}|={len(self.edges[k])}" for k in RELATIONS)
        return f"TripartiteGraph(N={s.num_users}, L={s.num_items}, K={s.num_bundles}, {counts})"

    def same_edges(self, other: "TripartiteGraph") -> bool:
        return self.space == other.space and all(self.edges[k] == other.edges[k] for k in RELATIONS)

    def global_pairs(self, kind: RelationKind) -> np.ndarray:
        src, dst = kind.endpoints
        pairs = self.edges[kind].pairs
        return np.stack([pairs[:, 0] + self.space.offset(src), pairs[:, 1] + self.space.offset(dst)], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        if self._adjacency is None:
            self._adjacency = normalized_adjacency(self)
        return self._adjacency


def build_graph(space: NodeSpace, ub=(), ui=(), bi=()) -> TripartiteGraph:
    edges = {
        RelationKind.UB: EdgeSet(RelationKind.UB, space.shape(RelationKind.UB), ub),
        RelationKind.UI: EdgeSet(RelationKind.UI, space.shape(RelationKind.UI), ui),
        RelationKind.BI: EdgeSet(RelationKind.BI, space.shape(RelationKind.BI), bi),
    }
    return TripartiteGraph(space, edges)


def normalized_adjacency(graph: TripartiteGraph) -> sp.csr_matrix:
    """Symmetric operator with weight 1/sqrt(d_i d_j) on every edge.

    d is the total degree over all three relations. Isolated nodes give
    empty rows.
    """
    n = graph.space.num_nodes
    pairs = [graph.global_pairs(k) for k in RELATIONS]
    pairs = np.concatenate(pairs, axis=0) if pairs else np.empty((0, 2), np.int64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    deg = graph.total_degree.astype(np.float64)
    weights = 1.0 / np.sqrt(deg[rows] * deg[cols]) if len(rows) else np.empty(0)
    mat = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    return mat


def apply_delta(graph: TripartiteGraph, delta: ViewDelta) -> TripartiteGraph:
    """Return a new graph with delta's additions merged and drops removed."""
    edges = {}
    for kind in RELATIONS:
        es = graph.edges[kind]
        add, drop = delta.added[kind], delta.dropped[kind]
        if len(add):
            present = es.contains(add)
            if present.any():
                s, d = add[np.argmax(present)]
                raise GraphError(f"relation {kind.value}: cannot add existing edge ({s}, {d})")
        if len(drop):
            present = es.contains(drop)
            if not present.all():
                s, d = drop[np.argmin(present)]
                raise GraphError(f"relation {kind.value}: cannot drop missing edge ({s}, {d})")
        keep = es.pairs
        if len(drop):
            keep = keep[~np.isin(es.keys, es.encode(drop))]
        edges[kind] = EdgeSet(kind, es.shape, np.concatenate([keep, add.reshape(-1, 2)], axis=0))
    return TripartiteGraph(graph.space, edges)
