"""Planted block-model tripartite graphs for benchmarks and fixtures.

Users, items and bundles are assigned to communities. Bundles hold items
from their own community, users interact with items and bundles mostly
inside their community. A fraction of the true user-bundle preferences
is withheld from the observed graph and returned as ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NodeSpace, TripartiteGraph, build_graph


@dataclass(frozen=True)
class PlantedGraph:
    graph: TripartiteGraph
    hidden_ub: np.ndarray  # true user-bundle pairs withheld from the graph
    user_block: np.ndarray
    item_block: np.ndarray
    bundle_block: np.ndarray


def _bernoulli_pairs(rng, src_block, dst_block, p_in, p_out):
    same = src_block[:, None] == dst_block[None, :]
    prob = np.where(same, p_in, p_out)
    mask = rng.random(prob.shape) < prob
    return np.argwhere(mask).astype(np.int64)


def planted_graph(
    num_users: int = 60,
    num_items: int = 120,
    num_bundles: int = 30,
    num_blocks: int = 3,
    p_ub: float = 0.5,
    p_ub_noise: float = 0.02,
    observed: float = 0.5,
    p_ui: float = 0.15,
    p_ui_noise: float = 0.01,
    items_per_bundle: int = 6,
    seed: int = 0,
) -> PlantedGraph:
    rng = np.random.default_rng(seed)
    ub_block = rng.integers(num_blocks, size=num_users)
    ib = rng.integers(num_blocks, size=num_items)
    bb = rng.integers(num_blocks, size=num_bundles)

    true_ub = _bernoulli_pairs(rng, ub_block, bb, p_ub, 0.0)
    # every user keeps at least one observed preference
    keep = rng.random(len(true_ub)) < observed
    for u in np.unique(true_ub[:, 0]):
        rows = np.flatnonzero(true_ub[:, 0] == u)
        if not keep[rows].any():
            keep[rows[0]] = True
    noise_ub = _bernoulli_pairs(rng, ub_block, bb, 0.0, p_ub_noise)
    ub = np.concatenate([true_ub[keep], noise_ub])
    hidden = true_ub[~keep]

    ui = _bernoulli_pairs(rng, ub_block, ib, p_ui, p_ui_noise)
    bi = []
    for b in range(num_bundles):
        pool = np.flatnonzero(ib == bb[b])
        if len(pool) == 0:
            pool = np.arange(num_items)
        chosen = rng.choice(pool, size=min(items_per_bundle, len(pool)), replace=False)
        bi.extend((b, int(i)) for i in chosen)

    graph = build_graph(NodeSpace(num_users, num_items, num_bundles), ub, ui, np.array(bi, dtype=np.int64))
    return PlantedGraph(graph, hidden, ub_block, ib, bb)
