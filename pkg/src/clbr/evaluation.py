"""Per-user train/valid/test splitting and top-k ranking metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SplitSpec
from .errors import DataError
from .graph import RelationKind, TripartiteGraph, build_graph

DEFAULT_KS = (20, 40)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(graph: TripartiteGraph, spec: SplitSpec):
    """Partition each user's UB edges into train / validation / test.

    UI and BI edges stay in the train graph. Users with fewer than three
    interactions keep everything in train. Returns
    ``(train_graph, valid_pairs, test_pairs)`` with pairs as (m, 2) arrays.
    """
    ub = graph.edges[RelationKind.UB].pairs
    if len(ub) == 0:
        raise DataError("cannot split: graph has no user-bundle edges")
    rng = np.random.default_rng(spec.seed)
    users, starts = np.unique(ub[:, 0], return_index=True)
    bounds = list(starts) + [len(ub)]
    train, valid, test = [], [], []
    for idx in range(len(users)):
        rows = ub[bounds[idx]:bounds[idx + 1]]
        n = len(rows)
        if n < 3:
            train.append(rows)
            continue
        rows = rows[rng.permutation(n)]
        n_val = _round_half_up(spec.valid * n)
        n_test = _round_half_up(spec.test * n)
        while n_val + n_test > n - 1:
            if n_test >= n_val and n_test > 0:
                n_test -= 1
            else:
                n_val -= 1
        valid.append(rows[:n_val])
        test.append(rows[n_val:n_val + n_test])
        train.append(rows[n_val + n_test:])

    def cat(parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return np.empty((0, 2), dtype=np.int64)
        out = np.concatenate(parts)
        return out[np.lexsort((out[:, 1], out[:, 0]))]

    train_graph = build_graph(
        graph.space, cat(train), graph.edges[RelationKind.UI].pairs, graph.edges[RelationKind.BI].pairs
    )
    return train_graph, cat(valid), cat(test)


def group_by_user(pairs) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for u, b in np.asarray(pairs, dtype=np.int64).reshape(-1, 2).tolist():
        out.setdefault(u, set()).add(b)
    return out


def rank_from_scores(scores, exclude=()) -> np.ndarray:
    """Bundle ids by descending score, ties by ascending id."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    if len(exclude):
        order = order[~np.isin(order, np.fromiter(exclude, dtype=np.int64))]
    return order


def rank_bundles(model, user: int, exclude=()) -> np.ndarray:
    n_users = model.space.num_users
    if not 0 <= user < n_users:
        raise KeyError(f"unknown user id {user} (have {n_users} users)")
    return rank_from_scores(model.bundle_scores(user), exclude)


def recall_at_k(ranked, relevant, k: int) -> float | None:
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    if not relevant:
        return None
    hits = sum(1 for b in list(ranked)[:k] if b in relevant)
    return hits / len(relevant)


def ndcg_at_k(ranked, relevant, k: int) -> float | None:
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = set(relevant)
    if not relevant:
        return None
    dcg = sum(1.0 / math.log2(r + 2) for r, b in enumerate(list(ranked)[:k]) if b in relevant)
    idcg = sum(1.0 / math.log2(r + 2) for r in range(min(k, len(relevant))))
    return dcg / idcg


@dataclass
class MetricsReport:
    ks: tuple
    users: list
    per_user: dict = field(default_factory=dict)  # (metric, k) -> list aligned with users
    seed: int | None = None

    @property
    def n_users(self) -> int:
        return len(self.users)

    def mean(self, metric: str, k: int) -> float:
        vals = self.per_user[(metric, k)]
        return float(np.mean(vals)) if vals else 0.0

    def recall(self, k: int) -> float:
        return self.mean("recall", k)

    def ndcg(self, k: int) -> float:
        return self.mean("ndcg", k)

    def rows(self) -> list[dict]:
        return [
            {"metric": m, "k": k, "value": self.mean(m, k), "n_users": self.n_users, "seed": self.seed}
            for m in ("recall", "ndcg") for k in self.ks
        ]

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "n_users": self.n_users,
            "metrics": {f"{m}@{k}": self.mean(m, k) for m in ("recall", "ndcg") for k in self.ks},
        }


def evaluate(model, test_pairs, ks=DEFAULT_KS, seed: int | None = None, exclude_pairs=None) -> MetricsReport:
    """Mean Recall@k / NDCG@k over users with a nonempty test set.

    Training positives (the UB edges of ``model.graph`` unless
    ``exclude_pairs`` is given) are removed from each ranking.
    """
    ks = tuple(int(k) for k in ks)
    relevant = group_by_user(test_pairs)
    if exclude_pairs is None:
        exclude_pairs = model.graph.edges[RelationKind.UB].pairs
    known = group_by_user(exclude_pairs)
    users = sorted(u for u, rel in relevant.items() if rel)
    report = MetricsReport(ks=ks, users=users, seed=seed,
                           per_user={(m, k): [] for m in ("recall", "ndcg") for k in ks})
    if not users:
        return report
    scores = model.bundle_scores(np.asarray(users))
    for row, u in enumerate(users):
        ranked = rank_from_scores(scores[row], known.get(u, ())).tolist()
        for k in ks:
            report.per_user[("recall", k)].append(recall_at_k(ranked, relevant[u], k))
            report.per_user[("ndcg", k)].append(ndcg_at_k(ranked, relevant[u], k))
    return report
