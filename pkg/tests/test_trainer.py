import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dags
from dagrelu.dag import Dag, chain, mlp, reduced_incidence
from dagrelu.datasets import summing_task
from dagrelu.errors import DivergenceDetected
from dagrelu.network import RELU, Dataset, loss, rescale
from dagrelu.trainer import (
    DEFAULT_ALPHA, TrainConfig, estimate_edge_drop_rate, init_params, prune_scores,
    regularizer_value_and_grad, train,
)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(steps=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(regularizer="dropout")
    with pytest.raises(ValueError):
        TrainConfig(alpha=-1.0, regularizer="l1")
    assert TrainConfig(regularizer="nuclear").alpha == DEFAULT_ALPHA["nuclear"] == 0.05
    assert TrainConfig(regularizer="l1").alpha == 10.0
    assert TrainConfig(regularizer="l2").alpha == 20.0
    assert TrainConfig(regularizer="l1", alpha=0.0).effective_regularizer == "none"


def test_init_schemes():
    g = mlp([2, 3, 1])
    u = init_params(g, ("uniform", -1, 1), 0)
    assert u.shape == (g.n_edges,) and np.all(np.abs(u) <= 1)
    assert np.array_equal(u, init_params(g, ("uniform", -1, 1), 0))
    assert init_params(g, ("normal", 0.1), 0).shape == (g.n_edges,)
    assert init_params(g, ("explicit", list(range(9))), 0).tolist() == list(range(9))
    with pytest.raises(ValueError):
        init_params(g, ("explicit", [1.0]), 0)
    with pytest.raises(ValueError):
        init_params(g, ("cauchy",), 0)


def test_regularizers():
    B = reduced_incidence(chain(1))
    th = np.array([0.0, -2.0])
    assert regularizer_value_and_grad("l1", B, th) == (2.0, pytest.approx([0.0, -1.0]))
    v, g = regularizer_value_and_grad("l2", B, th)
    assert v == 4.0 and g.tolist() == [0.0, -4.0]
    v, g = regularizer_value_and_grad("nuclear", B, [3.0, 4.0])
    assert v == pytest.approx(10.0)


def test_training_reduces_loss(backend):
    g = mlp([2, 4, 1])
    d = summing_task(64)
    th, rec = train(g, RELU, d, TrainConfig(lr=1e-2, steps=300, log_every=50))
    assert rec.final().task_loss < rec.snapshots[0].task_loss
    assert rec.steps == [0, 50, 100, 150, 200, 250, 300]
    assert rec.snapshots[0].drift == 0.0
    assert loss(g, RELU, th, d) <= rec.final().task_loss


def test_final_step_always_logged():
    _, rec = train(chain(1), RELU, summing_task(8, d=1), TrainConfig(steps=7, log_every=5))
    assert rec.steps == [0, 5, 7]


def test_training_is_deterministic(backend):
    g = mlp([2, 4, 1])
    d = summing_task(32)
    cfg = TrainConfig(steps=50, regularizer="nuclear", seed=3, batch_size=8)
    a = train(g, RELU, d, cfg)
    b = train(g, RELU, d, cfg)
    assert np.array_equal(a[0], b[0])
    assert a[1].to_dict() == b[1].to_dict()


def test_divergence_detected():
    g = Dag([(0, "input"), (1, "output")], [(0, 0, 1)])
    d = Dataset([[10.0]], [[0.0]])
    with pytest.raises(DivergenceDetected):
        train(g, RELU, d, TrainConfig(lr=10.0, steps=1000), theta0=[1.0])


def test_l1_keeps_exact_zeros():
    g = mlp([2, 3, 1])
    d = summing_task(16)
    th0 = init_params(g, ("uniform", -1, 1), 0)
    for e in g.in_edges(3) + g.out_edges(3):
        th0[g.edge_index[e]] = 0.0
    th, _ = train(g, RELU, d, TrainConfig(steps=100, regularizer="l1", alpha=0.01), theta0=th0)
    for e in g.in_edges(3) + g.out_edges(3):
        assert th[g.edge_index[e]] == 0.0


def test_callback_sees_every_step():
    seen = []
    train(chain(1), RELU, summing_task(4, d=1), TrainConfig(steps=5),
          callback=lambda s, th, g: seen.append(s))
    assert seen == [0, 1, 2, 3, 4]


def test_record_serialisation(tmp_path):
    g = mlp([2, 3, 1])
    _, rec = train(g, RELU, summing_task(16), TrainConfig(steps=20, log_every=10,
                                                          regularizer="l2", alpha=0.1))
    rec.write_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == rec.columns()
    assert len(rows) == 4
    assert all(len(r) == len(rows[0]) for r in rows)
    # full precision survives the round trip
    assert float(rows[2][1]) == rec.snapshots[1].task_loss
    assert set(rec.column_manifest()) >= {"step", "task_loss", "drift", "n_null_sv"}
    rec.write_json(tmp_path / "r.json")
    assert json.load(open(tmp_path / "r.json"))["snapshots"][2]["step"] == 20
    rec.write_long_csv(tmp_path / "r.long.csv")
    long = list(csv.reader(open(tmp_path / "r.long.csv")))
    assert long[0] == ["step", "quantity", "index", "value"]
    assert {r[1] for r in long[1:]} == {"task_loss", "reg_value", "drift", "n_null_sv",
                                          "c", "sv", "s", "smax"}


def test_prune_scores_by_hand():
    g = chain(1)
    s, smax = prune_scores(g, [2.0, 3.0])
    assert s.tolist() == [36.0] and smax.tolist() == [9.0]


@given(dags(), st.integers(0, 2**32 - 1), st.floats(1e-3, 10.0))
def test_prune_score_rescaling_invariance(g, seed, alpha):
    th = np.random.default_rng(seed).normal(size=g.n_edges)
    s, _ = prune_scores(g, th)
    for i, v in enumerate(g.hidden):
        s2, _ = prune_scores(g, rescale(g, th, v, alpha))
        # neighbours' scores move; v's own does not
        assert s2[i] == pytest.approx(s[i], rel=1e-12, abs=0)
        assert np.all(s2 >= 0)


def test_edge_drop_rate():
    assert estimate_edge_drop_rate(np.ones(4)) == 0.0
    assert estimate_edge_drop_rate(np.zeros(4)) == 1.0
    assert estimate_edge_drop_rate([1e-4, 1e-4, 1.0, 1.0]) == 0.5
    assert estimate_edge_drop_rate([]) == 0.0
