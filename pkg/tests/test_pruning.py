import numpy as np
import pytest

from dagrelu.dag import Dag, mlp
from dagrelu.datasets import summing_task
from dagrelu.network import RELU, loss, predict
from dagrelu.pruning import prune_curve, prune_neurons, prune_order, remove_hidden
from dagrelu.singularity import disconnected_sets


def _net(seed=0):
    g = mlp([2, 4, 1])
    th = np.random.default_rng(seed).normal(size=g.n_edges)
    return g, th


def test_k_zero_is_identity():
    g, th = _net()
    g2, th2, stranded = prune_neurons(g, th, "s", 0)
    assert g2 == g and np.array_equal(th2, th) and stranded == []


def test_order_and_ties():
    g, th = _net()
    th[:] = 1.0
    assert prune_order(g, th, "s") == list(g.hidden)
    with pytest.raises(ValueError):
        prune_order(g, th, "random")
    with pytest.raises(ValueError):
        prune_neurons(g, th, "s", 5)


def test_zero_score_neuron_pruned_exactly(backend):
    g, th = _net(1)
    for e in g.in_edges(4):
        th[g.edge_index[e]] = 0.0
    assert prune_order(g, th)[0] == 4
    g2, th2, _ = prune_neurons(g, th, "s", 1)
    X = np.random.default_rng(2).normal(size=(1000, 2))
    assert np.array_equal(predict(g2, RELU, th2, X), predict(g, RELU, th, X))


@pytest.mark.parametrize("seed", range(5))
def test_disconnected_components_prune_losslessly(backend, seed):
    g = mlp([3, 5, 4, 2])
    rng = np.random.default_rng(seed)
    th = rng.normal(size=g.n_edges)
    victims = rng.choice(list(g.hidden), 2, replace=False).tolist()
    for v in victims:
        for e in g.in_edges(v) + g.out_edges(v):
            th[g.edge_index[e]] = 0.0
    groups = disconnected_sets(g, th, 0.0)
    drop = sorted(set().union(*groups))
    g2, th2, _ = remove_hidden(g, th, drop)
    X = rng.normal(size=(1000, 3))
    assert np.array_equal(predict(g2, RELU, th2, X), predict(g, RELU, th, X))


def test_stranded_nodes_removed():
    g = Dag([(0, "input"), (1, "hidden"), (2, "hidden"), (3, "output")],
            [(0, 0, 1), (1, 1, 2), (2, 2, 3)])
    g2, th2, stranded = remove_hidden(g, np.ones(3), [1])
    assert stranded == [2] and g2.hidden == () and th2.size == 0


def test_prune_everything_gives_zero_function():
    g, th = _net()
    g2, th2, _ = prune_neurons(g, th, "s", 4)
    assert np.all(predict(g2, RELU, th2, np.ones((5, 2))) == 0.0)


def test_prune_curve(backend):
    g, th = _net()
    d = summing_task(50)
    curve = prune_curve(g, th, d)
    assert [k for k, _ in curve] == [0, 1, 2, 3, 4]
    assert curve[0][1] == loss(g, RELU, th, d)
    assert curve[-1][1] == pytest.approx(0.5 * np.mean(d.targets ** 2))
    assert prune_curve(g, th, d) == curve
