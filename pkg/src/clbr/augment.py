"""Counterfactual view generation by edge addition and dropping.

Two samplers are provided. The stochastic one adds uniformly random
non-edges and drops uniformly random edges. The heuristic one scores
random candidate batches with a pretrained selection model and keeps only
pairs beyond batch-relative thresholds:

    add  (i, j)  if score >  kappa_plus  and (i, j) is not an edge
    drop (i, j)  if score <= kappa_minus and (i, j) is an edge

An edge that is the last remaining edge of either endpoint in its
relation is never dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AugmentConfig
from .encoder import PropagatedEmbeddings
from .errors import SamplerExhaustedError
from .graph import RELATIONS, EdgeSet, RelationKind, TripartiteGraph, ViewDelta, apply_delta
from .seeding import derive_seed

# pair spaces up to this size are enumerated instead of rejection-sampled
_ENUMERATE_LIMIT = 4_000_000


@dataclass(frozen=True)
class CounterfactualView:
    delta: ViewDelta
    graph: TripartiteGraph
    seed: int
    sampler: str = "heuristic"


@dataclass(frozen=True)
class BatchThresholds:
    kappa_plus: float
    kappa_minus: float

    @classmethod
    def from_scores(cls, scores, alpha_plus: float = 0.8, alpha_minus: float = 1.2) -> "BatchThresholds":
        # applied verbatim: a batch whose max is <= 0 yields no additions
        scores = np.asarray(scores, dtype=np.float64)
        return cls(alpha_plus * float(scores.max()), alpha_minus * float(scores.min()))


def category_targets(num_edges: int, ratio: float, alpha: float) -> tuple[int, int, int]:
    """(total quota, add cap, drop cap) for one relation."""

    def up(x):
        return max(0, math.ceil(x - 1e-9))

    return up(ratio * num_edges), up(alpha * ratio * num_edges), up((1.0 - alpha) * ratio * num_edges)


def _endpoint_block(model: PropagatedEmbeddings, node_type: str) -> np.ndarray:
    return model.block(node_type)


def relevance_scores(kind: RelationKind, pairs, model: PropagatedEmbeddings) -> np.ndarray:
    """Inner products of the two endpoint embeddings of each pair."""
    kind = RelationKind(kind)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    src_t, dst_t = kind.endpoints
    src, dst = _endpoint_block(model, src_t), _endpoint_block(model, dst_t)
    if len(pairs) and (
        pairs[:, 0].min() < 0 or pairs[:, 0].max() >= len(src)
        or pairs[:, 1].min() < 0 or pairs[:, 1].max() >= len(dst)
    ):
        raise IndexError(f"relation {kind.value}: pair id out of bounds")
    return np.einsum("ij,ij->i", src[pairs[:, 0]], dst[pairs[:, 1]])


def selection_masks(scores, thresholds: BatchThresholds, is_edge) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores)
    is_edge = np.asarray(is_edge, dtype=bool)
    return (scores > thresholds.kappa_plus) & ~is_edge, (scores <= thresholds.kappa_minus) & is_edge


def select_pairs(kind: RelationKind, pairs, scores, thresholds: BatchThresholds, graph: TripartiteGraph) -> ViewDelta:
    """Apply the selection rule to one scored batch (no quota, no protection)."""
    kind = RelationKind(kind)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    add, drop = selection_masks(scores, thresholds, graph.edges[kind].contains(pairs))
    return ViewDelta(added={kind: _unique_rows(pairs[add])}, dropped={kind: _unique_rows(pairs[drop])})


def _unique_rows(pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    _, first = np.unique(pairs, axis=0, return_index=True)
    return pairs[np.sort(first)]


class _RelationState:
    """Accumulates one relation's add/drop sets with last-edge protection."""

    def __init__(self, edges: EdgeSet):
        self.edges = edges
        self.remaining_src, self.remaining_dst = (d.copy() for d in edges.degrees())
        self.added: dict[int, tuple[int, int]] = {}
        self.dropped: dict[int, tuple[int, int]] = {}

    @property
    def count(self) -> int:
        return len(self.added) + len(self.dropped)

    def try_add(self, s: int, d: int) -> bool:
        key = s * self.edges.shape[1] + d
        if key in self.added:
            return False
        self.added[key] = (s, d)
        return True

    def try_drop(self, s: int, d: int) -> bool:
        key = s * self.edges.shape[1] + d
        if key in self.dropped or self.remaining_src[s] < 2 or self.remaining_dst[d] < 2:
            return False
        self.remaining_src[s] -= 1
        self.remaining_dst[d] -= 1
        self.dropped[key] = (s, d)
        return True

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        def arr(store):
            return np.array(list(store.values()), dtype=np.int64).reshape(-1, 2)

        return arr(self.added), arr(self.dropped)


def _all_pairs(n_src: int, n_dst: int) -> np.ndarray:
    s, d = np.divmod(np.arange(n_src * n_dst, dtype=np.int64), n_dst)
    return np.stack([s, d], axis=1)


def _heuristic_relation(kind, edges: EdgeSet, model, cfg: AugmentConfig, rng) -> _RelationState:
    """Fill one relation's add/drop sets until their total reaches the quota.

    Only the total is bounded; the add/drop split is left to the rule
    itself (drops need an edge at the bottom of a random batch and are
    rare once the selection model fits the data).
    """
    state = _RelationState(edges)
    target, _, _ = category_targets(len(edges), cfg.ratio(kind), cfg.alpha)
    n_src, n_dst = edges.shape
    exhaustive = cfg.batch_size >= n_src * n_dst
    batches = 0
    while state.count < target:
        if batches >= cfg.max_batches:
            raise SamplerExhaustedError(kind.value, target, len(state.added), len(state.dropped), batches)
        if exhaustive:
            pairs = _all_pairs(n_src, n_dst)
        else:
            pairs = np.stack([rng.integers(n_src, size=cfg.batch_size), rng.integers(n_dst, size=cfg.batch_size)], axis=1)
        scores = relevance_scores(kind, pairs, model)
        th = BatchThresholds.from_scores(scores, cfg.alpha_plus, cfg.alpha_minus)
        add, drop = selection_masks(scores, th, edges.contains(pairs))
        before = state.count
        # the whole batch is applied, so the quota overshoots by at most one batch
        for i in np.flatnonzero(add | drop).tolist():
            s, d = int(pairs[i, 0]), int(pairs[i, 1])
            if add[i]:
                state.try_add(s, d)
            else:
                state.try_drop(s, d)
        batches += 1
        if exhaustive and state.count == before and state.count < target:
            # every later batch is identical, so no further progress is possible
            raise SamplerExhaustedError(kind.value, target, len(state.added), len(state.dropped), batches)
    return state


def _stochastic_relation(kind, edges: EdgeSet, cfg: AugmentConfig, rng) -> _RelationState:
    """Uniform drops up to the drop cap, then uniform adds.

    Drops that last-edge protection forbids are replaced by additions, so
    the total always reaches the quota.
    """
    state = _RelationState(edges)
    _, add_cap, drop_cap = category_targets(len(edges), cfg.ratio(kind), cfg.alpha)
    n_src, n_dst = edges.shape
    if drop_cap:
        for i in rng.permutation(len(edges)).tolist():
            if len(state.dropped) >= drop_cap:
                break
            state.try_drop(int(edges.pairs[i, 0]), int(edges.pairs[i, 1]))
    n_add = add_cap + drop_cap - len(state.dropped)
    space = n_src * n_dst
    if n_add > space - len(edges):
        raise SamplerExhaustedError(kind.value, add_cap + drop_cap, 0, len(state.dropped), 0)
    if n_add:
        if space <= _ENUMERATE_LIMIT:
            free = np.setdiff1d(np.arange(space, dtype=np.int64), edges.keys, assume_unique=True)
            for key in rng.choice(free, size=n_add, replace=False).tolist():
                state.try_add(*divmod(key, n_dst))
        else:
            while len(state.added) < n_add:
                s, d = int(rng.integers(n_src)), int(rng.integers(n_dst))
                if not edges.contains([[s, d]])[0]:
                    state.try_add(s, d)
    return state


def _view_from_states(factual: TripartiteGraph, states: dict, seed: int, sampler: str) -> CounterfactualView:
    added, dropped = {}, {}
    for kind, st in states.items():
        added[kind], dropped[kind] = st.arrays()
    delta = ViewDelta(added=added, dropped=dropped)
    return CounterfactualView(delta, apply_delta(factual, delta), seed, sampler)


def heuristic_generate(factual: TripartiteGraph, selection_model: PropagatedEmbeddings,
                       cfg: AugmentConfig, seed: int) -> CounterfactualView:
    rng = np.random.default_rng(seed)
    states = {k: _heuristic_relation(k, factual.edges[k], selection_model, cfg, rng) for k in RELATIONS}
    return _view_from_states(factual, states, seed, "heuristic")


def stochastic_generate(factual: TripartiteGraph, cfg: AugmentConfig, seed: int) -> CounterfactualView:
    rng = np.random.default_rng(seed)
    states = {k: _stochastic_relation(k, factual.edges[k], cfg, rng) for k in RELATIONS}
    return _view_from_states(factual, states, seed, "stochastic")


def generate_view_set(factual: TripartiteGraph, selection_model: PropagatedEmbeddings | None,
                      cfg: AugmentConfig, seed: int) -> list[CounterfactualView]:
    views = []
    for i in range(cfg.num_views):
        view_seed = derive_seed(seed, f"view-{i}")
        if cfg.sampler == "heuristic":
            if selection_model is None:
                raise ValueError("heuristic sampler needs a selection model")
            views.append(heuristic_generate(factual, selection_model, cfg, view_seed))
        else:
            views.append(stochastic_generate(factual, cfg, view_seed))
    return views


def identity_view(factual: TripartiteGraph, seed: int = 0) -> CounterfactualView:
    return CounterfactualView(ViewDelta(), factual, seed, "identity")
