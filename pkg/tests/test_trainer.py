import dataclasses

import numpy as np
import pytest

from clbr.augment import identity_view
from clbr.config import TrainConfig
from clbr.encoder import EmbeddingTable, propagate
from clbr.errors import ConfigError, DataError, NumericError
from clbr.graph import NodeSpace, RelationKind, build_graph
from clbr.objective import LossConfig
from clbr.seeding import derive_seed
from clbr.synthetic import planted_graph
from clbr.trainer import OptimizerState, adam_step, pretrain_selection_model, sample_negatives, train

PLAIN = LossConfig(omega_u=0.0, omega_b=0.0)


def small_cfg(**kw):
    base = dict(learning_rate=1e-2, epochs=5, minibatch_size=64, embedding_dim=8, seed=11, loss=PLAIN)
    base.update(kw)
    return TrainConfig(**base)


def test_adam_first_step_has_size_lr():
    p = np.zeros(1)
    st = OptimizerState.zeros_like(p)
    adam_step(p, np.ones(1), st, 0.1)
    assert p[0] == pytest.approx(-0.1, rel=1e-7)
    assert st.step == 1


def test_adam_zero_gradient():
    p = np.array([1.0, -2.0])
    st = OptimizerState(np.array([0.5, 0.5]), np.array([0.1, 0.1]), step=3)
    m0 = st.m.copy()
    adam_step(p, np.zeros(2), st, 0.1)
    assert np.all(np.abs(st.m) < np.abs(m0))
    st2 = OptimizerState.zeros_like(p)
    q = p.copy()
    adam_step(q, np.zeros(2), st2, 0.1)
    assert np.array_equal(q, p)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(3), OptimizerState.zeros_like(np.zeros(2)), 0.1)


def test_adam_matches_recurrence_over_steps():
    rng = np.random.default_rng(0)
    p = rng.normal(size=4)
    st = OptimizerState.zeros_like(p)
    m = v = np.zeros(4)
    ref = p.copy()
    for t in range(1, 6):
        g = rng.normal(size=4)
        adam_step(p, g, st, 0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(p, ref, rtol=0, atol=1e-14)


def test_negatives_avoid_positives():
    g = planted_graph(seed=0).graph
    ub = g.edges[RelationKind.UB]
    users = ub.pairs[:, 0]
    neg = sample_negatives(users, ub, g.space.num_bundles, np.random.default_rng(0))
    assert not ub.contains(np.stack([users, neg], 1)).any()


def test_collapse_to_plain_bpr_is_bitwise():
    g = planted_graph(seed=1).graph
    cfg = small_cfg(epochs=4)
    plain = train(g, [], cfg)
    collapsed = train(g, [identity_view(g)], cfg)
    assert np.array_equal(plain.params.weights, collapsed.params.weights)
    for a, b in zip(plain.history, collapsed.history):
        assert (a["l_task"], a["total"]) == (b["l_task"], b["total"])


def test_same_seed_same_trajectory():
    g = planted_graph(seed=2).graph
    a, b = train(g, [], small_cfg()), train(g, [], small_cfg())
    assert np.array_equal(a.params.weights, b.params.weights) and a.history == b.history


def test_constrained_training_needs_views():
    g = planted_graph(seed=0).graph
    with pytest.raises(ValueError):
        train(g, [], small_cfg(loss=LossConfig()))


def test_training_needs_ub_edges():
    g = build_graph(NodeSpace(2, 2, 2), ui=[(0, 0)])
    with pytest.raises(DataError):
        train(g, [], small_cfg())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_names_epoch_and_batch():
    g = planted_graph(seed=0).graph
    with pytest.raises(NumericError, match=r"epoch 0, batch \d+"):
        train(g, [], small_cfg(learning_rate=1e200, epochs=3))


def test_learning_rate_decay_schedule():
    g = planted_graph(seed=0).graph
    h = train(g, [], small_cfg(epochs=5, lr_decay=0.5, lr_decay_step=2)).history
    assert [r["lr"] for r in h] == [1e-2, 1e-2, 5e-3, 5e-3, 2.5e-3]


def test_early_stopping_keeps_best_epoch():
    pg = planted_graph(seed=0, observed=0.7)
    model = train(pg.graph, [], small_cfg(epochs=200, early_stop_patience=3), valid_pairs=pg.hidden_ub)
    assert len(model.history) < 200


def test_pretrain_zero_epochs_is_initial_encoder():
    g = planted_graph(seed=0).graph
    cfg = small_cfg(pretrain_epochs=0)
    sel = pretrain_selection_model(g, cfg)
    init = EmbeddingTable.gaussian(g.space, cfg.embedding_dim, derive_seed(cfg.seed, "pretrain-init"))
    assert np.array_equal(sel.table, propagate(init, g.adjacency(), cfg.layers).table)


def test_pretrained_scores_reflect_planted_blocks():
    pg = planted_graph(seed=4)
    cfg = small_cfg(pretrain_epochs=50)
    sel = pretrain_selection_model(pg.graph, cfg)
    scores = sel.users @ sel.bundles.T
    same = pg.user_block[:, None] == pg.bundle_block[None, :]
    assert scores[same].mean() > scores[~same].mean()
    again = pretrain_selection_model(pg.graph, cfg)
    assert np.array_equal(sel.table, again.table)


def test_frozen_inference_values():
    # regression anchor: 5 plain epochs on the default planted graph, seed 11
    model = train(planted_graph(seed=0).graph, [], small_cfg())
    s = model.bundle_scores(np.arange(5))
    assert float(s.sum()) == pytest.approx(0.1876213821879532, abs=1e-10)
    assert float(s[0, 0]) == pytest.approx(0.03767033910689583, abs=1e-10)
    assert model.history[-1]["total"] == pytest.approx(0.6638925993836242, abs=1e-10)


@pytest.mark.slow
def test_total_loss_mostly_decreases_early():
    from clbr.augment import generate_view_set
    from clbr.benchmark import BENCH_GRAPH
    from clbr.config import AugmentConfig

    g = planted_graph(seed=0, **BENCH_GRAPH).graph
    cfg = TrainConfig(learning_rate=3e-3, epochs=20, minibatch_size=512, embedding_dim=32, pretrain_epochs=30)
    views = generate_view_set(g, pretrain_selection_model(g, cfg), AugmentConfig(batch_size=128), 0)
    totals = [r["total"] for r in train(g, views, cfg).history]
    assert np.mean(np.diff(totals) <= 0) >= 0.9


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ConfigError):
        TrainConfig(layers=-1)
    assert dataclasses.replace(TrainConfig(), epochs=3).epochs == 3
