"""Pretraining, counterfactually constrained training, and inference."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .encoder import EmbeddingTable, PropagatedEmbeddings, propagate
from .errors import DataError, NumericError
from .graph import RelationKind, TripartiteGraph
from .objective import LossBreakdown, LossConfig, Minibatch, full_objective
from .seeding import derive_seed

log = logging.getLogger(__name__)

LOG_FIELDS = ("epoch", "view_index", "l_task", "l_u", "l_b", "total", "lr")


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, **kw) -> "OptimizerState":
        return cls(np.zeros_like(params), np.zeros_like(params), **kw)


def adam_step(params: np.ndarray, grads: np.ndarray, state: OptimizerState, lr: float):
    """One bias-corrected Adam update, in place. Returns (params, state)."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


@dataclass
class TrainedModel:
    params: EmbeddingTable
    graph: TripartiteGraph
    layers: int
    config: TrainConfig | None = None
    history: list = field(default_factory=list)
    _propagated: PropagatedEmbeddings | None = field(default=None, repr=False)

    @property
    def space(self):
        return self.graph.space

    def propagated(self) -> PropagatedEmbeddings:
        if self._propagated is None:
            self._propagated = propagate(self.params, self.graph.adjacency(), self.layers)
        return self._propagated

    def bundle_scores(self, users) -> np.ndarray:
        """Inner-product scores of user(s) against every bundle."""
        emb = self.propagated()
        return emb.users[users] @ emb.bundles.T


def sample_negatives(users: np.ndarray, ub_edges, num_bundles: int, rng) -> np.ndarray:
    """One uniformly random non-positive bundle per user, resampling collisions."""
    neg = rng.integers(num_bundles, size=len(users))
    bad = ub_edges.contains(np.stack([users, neg], axis=1))
    for _ in range(100):
        if not bad.any():
            break
        idx = np.flatnonzero(bad)
        neg[idx] = rng.integers(num_bundles, size=len(idx))
        bad[idx] = ub_edges.contains(np.stack([users[idx], neg[idx]], axis=1))
    return neg


def _epoch_batches(pairs: np.ndarray, ub_edges, num_bundles: int, batch_size: int, rng):
    order = rng.permutation(len(pairs))
    users, pos = pairs[order, 0], pairs[order, 1]
    neg = sample_negatives(users, ub_edges, num_bundles, rng)
    for start in range(0, len(pairs), batch_size):
        sl = slice(start, start + batch_size)
        yield Minibatch(users[sl], pos[sl], neg[sl])


def _mean_breakdown(parts: list, cfg: LossConfig) -> LossBreakdown:
    l_task = float(np.mean([p.l_task for p in parts]))
    l_u = float(np.mean([p.l_u for p in parts]))
    l_b = float(np.mean([p.l_b for p in parts]))
    return LossBreakdown(l_task, l_u, l_b, l_task + cfg.omega_u * l_u + cfg.omega_b * l_b)


def train(graph: TripartiteGraph, views, cfg: TrainConfig, *, init: EmbeddingTable | None = None,
          valid_pairs=None, on_epoch=None) -> TrainedModel:
    """Train embeddings with BPR plus the counterfactual constraint.

    Each epoch draws one view uniformly; every minibatch propagates the
    table over the factual graph and over that view. Views may be empty
    when the constraint weights are zero. Randomness is split into named
    streams of ``cfg.seed`` (init, views, batches) so that the view draws
    never perturb the minibatch sequence.
    """
    ub = graph.edges[RelationKind.UB]
    if len(ub) == 0:
        raise DataError("training needs at least one user-bundle edge")
    views = list(views or [])
    loss_cfg = cfg.loss
    if loss_cfg.constrained and not views:
        raise ValueError("constrained training needs at least one counterfactual view")

    space = graph.space
    if init is None:
        init = EmbeddingTable.gaussian(space, cfg.embedding_dim, derive_seed(cfg.seed, "init"))
    weights = init.weights.copy()
    state = OptimizerState.zeros_like(weights)
    view_rng = np.random.default_rng(derive_seed(cfg.seed, "views"))
    batch_rng = np.random.default_rng(derive_seed(cfg.seed, "batches"))

    factual_op = graph.adjacency()
    view_ops = [v.graph.adjacency() for v in views] if loss_cfg.constrained else []
    history = []
    lr = cfg.learning_rate
    best = (-np.inf, None, 0)  # (score, weights, epoch)
    for epoch in range(cfg.epochs):
        view_idx = int(view_rng.integers(len(views))) if views else -1
        view_op = view_ops[view_idx] if view_ops else None
        parts = []
        for b, batch in enumerate(_epoch_batches(ub.pairs, ub, space.num_bundles, cfg.minibatch_size, batch_rng)):
            breakdown, grad = full_objective(weights, factual_op, view_op, cfg.layers, batch, space, loss_cfg)
            if not (np.isfinite(breakdown.total) and np.isfinite(grad).all()):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}: {breakdown}")
            adam_step(weights, grad, state, lr)
            parts.append(breakdown)
        row = {"epoch": epoch, "view_index": view_idx, **_mean_breakdown(parts, loss_cfg).as_row(), "lr": lr}
        history.append(row)
        log.debug("epoch %d: %s", epoch, row)
        if on_epoch is not None:
            on_epoch(row, weights)
        if (epoch + 1) % cfg.lr_decay_step == 0:
            lr *= cfg.lr_decay

        if cfg.early_stop_patience and valid_pairs is not None and len(valid_pairs):
            from .evaluation import evaluate

            probe = TrainedModel(EmbeddingTable(space, weights.copy()), graph, cfg.layers)
            score = evaluate(probe, valid_pairs, ks=(20,)).recall(20)
            if score > best[0]:
                best = (score, weights.copy(), epoch)
            elif epoch - best[2] >= cfg.early_stop_patience:
                log.info("early stop at epoch %d (best %d)", epoch, best[2])
                weights = best[1]
                break

    return TrainedModel(EmbeddingTable(space, weights), graph, cfg.layers, cfg, history)


def pretrain_selection_model(graph: TripartiteGraph, cfg: TrainConfig) -> PropagatedEmbeddings:
    """BPR-only model of the same architecture, used to score candidates."""
    space = graph.space
    init = EmbeddingTable.gaussian(space, cfg.embedding_dim, derive_seed(cfg.seed, "pretrain-init"))
    if cfg.pretrain_epochs == 0:
        return propagate(init, graph.adjacency(), cfg.layers)
    pre_cfg = dataclasses.replace(
        cfg,
        epochs=cfg.pretrain_epochs,
        seed=derive_seed(cfg.seed, "pretrain"),
        loss=dataclasses.replace(cfg.loss, omega_u=0.0, omega_b=0.0),
        early_stop_patience=None,
    )
    return train(graph, [], pre_cfg, init=init).propagated()
