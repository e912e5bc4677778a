"""Executable forms of the noise/sample-size bound and the loss-term lemmas."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SampleComplexityQuery:
    epsilon: float
    delta: float
    eta: float
    hypothesis_count: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.eta < 0.5:
            # the bound diverges at eta = 0.5
            raise ValueError(f"eta must lie in (0, 0.5), got {self.eta}")
        if self.hypothesis_count < 1:
            raise ValueError("hypothesis_count must be >= 1")


def sample_complexity_bound(q: SampleComplexityQuery) -> float:
    """2 ln(2|H|/delta) / (eps^2 (1 - 2 eta)^2), before rounding up."""
    return 2.0 * math.log(2.0 * q.hypothesis_count / q.delta) / (q.epsilon ** 2 * (1.0 - 2.0 * q.eta) ** 2)


def sample_complexity(q: SampleComplexityQuery) -> int:
    return math.ceil(sample_complexity_bound(q))


def _check_unit_rows(x: np.ndarray, name: str, tol: float = 1e-8):
    norms = np.linalg.norm(x, axis=1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        raise ValueError(f"{name}: rows must be unit-normalized (max deviation {np.max(np.abs(norms - 1)):.3g})")


def consistency_identity_residual(view: np.ndarray, fact: np.ndarray) -> float:
    """|sum ||c_i - f_i||^2 - 2n - 2 sum D_lin(c_i, f_i)| with D_lin(a, b) = -a.b."""
    n = view.shape[0]
    sq = float(np.sum((view - fact) ** 2))
    d_lin = -float(np.sum(view * fact))
    return abs(sq - 2.0 * n - 2.0 * d_lin)


def unrestraint_term(view: np.ndarray, fact: np.ndarray, tau: float = 1.0) -> float:
    """-(1/n) sum_i sum_{j != i} D(c_j, f_i) with D = -exp(./tau)."""
    e = np.exp(view @ fact.T / tau)
    return float((e.sum() - np.trace(e)) / view.shape[0])


def clustered_control(n: int, dim: int, spread_deg: float = 10.0, rng=None) -> np.ndarray:
    """Unit rows packed into a cone of the given angular width."""
    rng = np.random.default_rng(rng)
    if dim == 2:
        theta = np.deg2rad(np.linspace(-spread_deg / 2, spread_deg / 2, n))
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    axis = np.zeros(dim)
    axis[0] = 1.0
    noise = rng.normal(size=(n, dim))
    noise[:, 0] = 0.0
    noise /= np.maximum(np.linalg.norm(noise, axis=1, keepdims=True), 1e-12)
    ang = np.deg2rad(spread_deg / 2) * rng.uniform(0, 1, size=(n, 1))
    return np.cos(ang) * axis + np.sin(ang) * noise


def lemma_oracles(factual: np.ndarray, views, tau: float = 1.0, control_spread_deg: float = 10.0, rng=0) -> dict:
    """Diagnostics for the consistency/unrestraint terms on unit rows.

    Reports the squared-distance identity residual per view, the trace and
    eigenvalues of ``V^T V`` for each view batch (the trace equals the row
    count for unit rows), and the unrestraint term of each view against a
    clustered control batch of the same shape.
    """
    factual = np.asarray(factual, dtype=np.float64)
    views = [np.asarray(v, dtype=np.float64) for v in views]
    if len(views) < 1:
        raise ValueError("need at least one view")
    _check_unit_rows(factual, "factual")
    for i, v in enumerate(views):
        if v.shape != factual.shape:
            raise ValueError(f"view {i}: shape {v.shape} != factual {factual.shape}")
        _check_unit_rows(v, f"view {i}")
    n, dim = factual.shape
    control = clustered_control(n, dim, control_spread_deg, rng)
    control_unres = unrestraint_term(control, control, tau)
    per_view = []
    for v in views:
        eig = np.linalg.eigvalsh(v.T @ v)
        unres = unrestraint_term(v, factual, tau)
        per_view.append({
            "identity_residual": consistency_identity_residual(v, factual),
            "covariance_trace": float(np.trace(v.T @ v)),
            "eigenvalues": eig.tolist(),
            # log-det gap to the uniform optimum where every eigenvalue is n / dim
            "log_eigen_gap": float(dim * math.log(n / dim) - np.sum(np.log(np.maximum(eig, 1e-300)))),
            "unrestraint": unres,
            "below_control": unres < control_unres,
        })
    return {
        "n_rows": n,
        "dim": dim,
        "max_identity_residual": max(p["identity_residual"] for p in per_view),
        "control_unrestraint": control_unres,
        "views": per_view,
    }
