from pathlib import Path

import numpy as np
import pytest

from clbr.graph import NodeSpace, build_graph

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "clbr" / "data" / "fixture"


def random_graph(rng, n_users=5, n_items=6, n_bundles=4, p=0.4):
    """Small random tripartite graph where every user and bundle has a UB edge."""
    rng = np.random.default_rng(rng)
    space = NodeSpace(n_users, n_items, n_bundles)

    def rel(n_src, n_dst):
        mask = rng.random((n_src, n_dst)) < p
        return np.argwhere(mask)

    ub = rel(n_users, n_bundles)
    ub = np.concatenate([ub, np.stack([np.arange(n_users), rng.integers(n_bundles, size=n_users)], 1),
                         np.stack([rng.integers(n_users, size=n_bundles), np.arange(n_bundles)], 1)])
    return build_graph(space, ub, rel(n_users, n_items), rel(n_bundles, n_items))


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f(x)
        x[idx] = old - h
        down = f(x)
        x[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def max_relative_error(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12))


def objective_instance(seed):
    """Random graph (<= 30 nodes), view, table and minibatch (<= 16 rows) for gradient checks."""
    from clbr.graph import ViewDelta, apply_delta, RelationKind
    from clbr.objective import LossConfig, Minibatch

    rng = np.random.default_rng(seed)
    g = random_graph(rng, n_users=int(rng.integers(3, 9)), n_items=int(rng.integers(3, 9)),
                     n_bundles=int(rng.integers(3, 9)))
    ub = g.edges[RelationKind.UB]
    n_src, n_dst = ub.shape
    free = np.setdiff1d(np.arange(n_src * n_dst), ub.keys)
    add = rng.choice(free, size=min(2, len(free)), replace=False)
    view = apply_delta(g, ViewDelta(added={RelationKind.UB: np.stack([add // n_dst, add % n_dst], 1)},
                                    dropped={RelationKind.UB: ub.pairs[:1]}))
    m = int(rng.integers(2, 17))
    rows = ub.pairs[rng.integers(len(ub), size=m)]
    batch = Minibatch(rows[:, 0], rows[:, 1], rng.integers(n_dst, size=m))
    cfg = LossConfig(omega_u=float(rng.uniform(0.05, 2)), omega_b=float(rng.uniform(0.05, 2)),
                     tau=float(rng.choice([0.5, 1.0, 2.0])))
    weights = rng.normal(0, 0.5, size=(g.space.num_nodes, int(rng.integers(2, 6))))
    layers = int(rng.integers(0, 4))
    return g, view, weights, batch, cfg, layers
