"""Counterfactual constraint loss, BPR task loss and their exact gradients.

Distances are ``D(a, b) = -exp(a.b / tau)``. For a minibatch of ``n``
aligned rows (counterfactual ``C``, factual ``F``, both unit-normalized)
the side loss is

    L = 1/n * sum_i [ D(c_i, f_i) - lam * sum_{j != i} D(c_j, f_i) ]

and the full objective is ``L_task + omega_u * L_u + omega_b * L_b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import backpropagate, propagate_table, row_normalize
from .errors import ConfigError


@dataclass(frozen=True)
class LossConfig:
    omega_u: float = 0.1
    omega_b: float = 0.1
    lambda_u: float | None = None
    lambda_b: float | None = None
    tau: float = 1.0

    def __post_init__(self):
        for name in ("omega_u", "omega_b"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss.{name} must be >= 0")
        for name in ("lambda_u", "lambda_b"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"loss.{name} must be >= 0")
        if not self.tau > 0:
            raise ConfigError("loss.tau must be > 0")

    @property
    def constrained(self) -> bool:
        return self.omega_u > 0 or self.omega_b > 0


@dataclass(frozen=True)
class LossBreakdown:
    l_task: float
    l_u: float
    l_b: float
    total: float

    def as_row(self) -> dict:
        return {"l_task": self.l_task, "l_u": self.l_u, "l_b": self.l_b, "total": self.total}


@dataclass(frozen=True)
class Minibatch:
    """BPR triples (user, positive bundle, negative bundle), local ids."""

    users: np.ndarray
    pos: np.ndarray
    neg: np.ndarray

    def __post_init__(self):
        if not (len(self.users) == len(self.pos) == len(self.neg)) or len(self.users) == 0:
            raise ValueError("minibatch arrays must be nonempty and of equal length")

    def constraint_users(self) -> np.ndarray:
        return np.unique(self.users)

    def constraint_bundles(self) -> np.ndarray:
        return np.unique(self.pos)


def distance(e_i, e_j, tau: float = 1.0) -> float:
    return -float(np.exp(np.dot(e_i, e_j) / tau))


def default_lambda(rows: int) -> float:
    return 1.0 / (rows - 1) if rows > 1 else 0.0


def _constraint(view, fact, lam, tau):
    view = np.asarray(view, dtype=np.float64)
    fact = np.asarray(fact, dtype=np.float64)
    if view.shape != fact.shape or view.ndim != 2:
        raise ValueError(f"shape mismatch: view {view.shape} vs factual {fact.shape}")
    n = view.shape[0]
    if lam is None:
        lam = default_lambda(n)
    # sim[j, i] = c_j . f_i / tau
    e = np.exp(view @ fact.T / tau)
    diag = np.trace(e)
    loss = (-diag + lam * (e.sum() - diag)) / n
    return loss, e, lam


def constraint_loss(view_emb, factual_emb, lam: float | None = None, tau: float = 1.0) -> float:
    """Batch-mean consistency minus lambda-weighted unrestraint distance."""
    return float(_constraint(view_emb, factual_emb, lam, tau)[0])


def constraint_loss_grad(view_emb, factual_emb, lam=None, tau=1.0):
    """Loss and gradients w.r.t. the (already normalized) view and factual rows."""
    loss, e, lam = _constraint(view_emb, factual_emb, lam, tau)
    n = e.shape[0]
    # dL/dsim = -w * exp(sim) / n with w = 1 on the diagonal, -lam elsewhere
    g = e * (lam / n)
    np.fill_diagonal(g, -np.diag(e) / n)
    g_view = g @ np.asarray(factual_emb, dtype=np.float64) / tau
    g_fact = g.T @ np.asarray(view_emb, dtype=np.float64) / tau
    return float(loss), g_view, g_fact


def normalize_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Pull a gradient on ``x/||x||`` back to ``x``; zero rows get zero."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    unit = x / safe
    out = (grad - unit * np.sum(unit * grad, axis=1, keepdims=True)) / safe
    out[norms[:, 0] == 0] = 0.0
    return out


def bpr_loss(pos_scores, neg_scores) -> float:
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or pos.shape != neg.shape:
        raise ValueError("bpr_loss needs equal-length nonempty score lists")
    # -ln sigmoid(x) = ln(1 + exp(-x))
    return float(np.mean(np.logaddexp(0.0, -(pos - neg))))


def bpr_grad(pos_scores, neg_scores) -> np.ndarray:
    """d bpr_loss / d (s_pos - s_neg), per pair."""
    diff = np.asarray(pos_scores, dtype=np.float64) - np.asarray(neg_scores, dtype=np.float64)
    sig_neg = np.exp(-np.logaddexp(0.0, diff))  # sigmoid(-diff)
    return -sig_neg / diff.size


def total_loss(task: float, l_u: float, l_b: float, cfg: LossConfig) -> LossBreakdown:
    return LossBreakdown(task, l_u, l_b, task + cfg.omega_u * l_u + cfg.omega_b * l_b)


def loss_gradients(batch: Minibatch, factual, view, space, cfg: LossConfig):
    """Total loss and its gradient w.r.t. both propagated tables.

    ``factual`` and ``view`` are full propagated tables (all nodes, global
    order). ``view`` may be None when the constraint is switched off.
    Returns ``(LossBreakdown, grad_factual, grad_view)``; ``grad_view`` is
    None when no constraint term is computed.
    """
    u_off, b_off = space.offset("user"), space.offset("bundle")
    gu = batch.users + u_off
    gp = batch.pos + b_off
    gn = batch.neg + b_off

    u = factual[gu]
    s_pos = np.sum(u * factual[gp], axis=1)
    s_neg = np.sum(u * factual[gn], axis=1)
    l_task = bpr_loss(s_pos, s_neg)
    dd = bpr_grad(s_pos, s_neg)[:, None]

    g_fact = np.zeros_like(factual)
    np.add.at(g_fact, gu, dd * (factual[gp] - factual[gn]))
    np.add.at(g_fact, gp, dd * u)
    np.add.at(g_fact, gn, -dd * u)

    if view is None or not cfg.constrained:
        return total_loss(l_task, 0.0, 0.0, cfg), g_fact, None

    g_view = np.zeros_like(view)
    sides = []
    for rows, omega, lam in (
        (batch.constraint_users() + u_off, cfg.omega_u, cfg.lambda_u),
        (batch.constraint_bundles() + b_off, cfg.omega_b, cfg.lambda_b),
    ):
        xc, xf = view[rows], factual[rows]
        loss, gc, gf = constraint_loss_grad(row_normalize(xc), row_normalize(xf), lam, cfg.tau)
        sides.append(loss)
        if omega > 0:
            g_view[rows] += omega * normalize_backward(xc, gc)
            g_fact[rows] += omega * normalize_backward(xf, gf)
    return total_loss(l_task, sides[0], sides[1], cfg), g_fact, g_view


def full_objective(weights, factual_op, view_op, layers: int, batch: Minibatch, space, cfg: LossConfig):
    """Objective and exact gradient w.r.t. the raw embedding table.

    Propagates the same table over the factual and counterfactual
    operators and sums both backpropagated contributions.
    """
    factual = propagate_table(weights, factual_op, layers)
    use_view = view_op is not None and cfg.constrained
    view = propagate_table(weights, view_op, layers) if use_view else None
    breakdown, g_fact, g_view = loss_gradients(batch, factual, view, space, cfg)
    grad = backpropagate(g_fact, factual_op, layers)
    if g_view is not None:
        grad += backpropagate(g_view, view_op, layers)
    return breakdown, grad
