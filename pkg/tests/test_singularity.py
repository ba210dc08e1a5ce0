import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dags
from oracles import central_difference, singular_values_via_gram
from dagrelu.dag import Dag, chain, mlp, reduced_incidence
from dagrelu.singularity import (
    disconnected_sets, jacobian, nuclear_norm_and_grad, numerical_rank, rank_via_topology,
    singular_values, singularity_report, zero_edges,
)


def test_jacobian_examples():
    B = reduced_incidence(mlp([2, 3, 1]))
    assert np.array_equal(jacobian(B, np.ones(B.shape[1])), 2 * B)
    th = np.ones(B.shape[1])
    th[4] = 0.0
    assert not np.any(jacobian(B, th)[:, 4])
    assert jacobian(reduced_incidence(chain(1)), [3.0, 4.0]).tolist() == [[6.0, -8.0]]


def test_singular_value_examples():
    assert np.allclose(singular_values(np.eye(3)), [1, 1, 1])
    assert np.allclose(singular_values([[3.0, 0.0], [0.0, 0.0]]), [3, 0])
    rng = np.random.default_rng(0)
    M = rng.normal(size=(4, 7))
    assert np.sum(singular_values(M) ** 2) == pytest.approx(np.sum(M * M), rel=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 12))
def test_singular_values_match_jacobi_oracle(seed, m, n):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(m, n))
    s = singular_values(M)
    assert np.all(np.diff(s) <= 0)
    o = singular_values_via_gram(M)[:len(s)]
    assert np.allclose(s, o, rtol=1e-10, atol=1e-10 * s[0])


def test_rank_examples():
    g = mlp([2, 3, 1])
    rng = np.random.default_rng(1)
    th = rng.uniform(0.5, 1.5, g.n_edges)
    assert rank_via_topology(g, th) == 3
    for e in g.in_edges(3) + g.out_edges(3):
        th[g.edge_index[e]] = 0.0
    assert rank_via_topology(g, th) == 2
    assert disconnected_sets(g, th) == [frozenset({3})]
    assert rank_via_topology(g, np.zeros(g.n_edges)) == 0


def test_pair_cut_from_boundary_is_one_set():
    g = Dag([(0, "input"), (1, "hidden"), (2, "hidden"), (3, "hidden"), (4, "output"),
             (5, "output")],
            [(0, 0, 1), (1, 0, 2), (2, 1, 2), (3, 2, 4), (4, 0, 3), (5, 3, 5), (6, 1, 4)])
    th = np.ones(g.n_edges)
    th[[0, 1, 3, 6]] = 0.0
    assert disconnected_sets(g, th, 0.0) == [frozenset({1, 2})]
    assert disconnected_sets(g, np.ones(g.n_edges)) == []


def test_zero_edges_tolerance():
    g = chain(1)
    assert zero_edges(g, [1e-4, 1.0]) == {0}
    assert zero_edges(g, [1e-4, 1.0], 0.0) == set()


@given(dags(max_hidden=10), st.integers(0, 2**32 - 1), st.sampled_from([0.2, 0.5, 0.8]))
def test_topological_rank_equals_numerical_rank(g, seed, q):
    rng = np.random.default_rng(seed)
    th = rng.uniform(0.5, 2.0, g.n_edges) * rng.choice([-1, 1], g.n_edges)
    th[rng.random(g.n_edges) < q] = 0.0
    J = jacobian(reduced_incidence(g), th)
    assert rank_via_topology(g, th, 0.0) == numerical_rank(J, 1e-8)


def test_nuclear_examples():
    B = reduced_incidence(chain(1))
    v, gr = nuclear_norm_and_grad(B, [3.0, 4.0])
    assert v == pytest.approx(10.0)
    fd = central_difference(lambda t: nuclear_norm_and_grad(B, t)[0], np.array([3.0, 4.0]))
    assert np.allclose(gr, fd, rtol=1e-6)
    v0, g0 = nuclear_norm_and_grad(B, [0.0, 0.0])
    assert v0 == 0.0 and not np.any(g0)
    B = reduced_incidence(mlp([2, 3, 2]))
    th = np.random.default_rng(0).normal(size=B.shape[1])
    assert nuclear_norm_and_grad(B, 2 * th)[0] == pytest.approx(2 * nuclear_norm_and_grad(B, th)[0])


@given(dags(max_hidden=6), st.integers(0, 2**32 - 1))
def test_nuclear_gradient_matches_finite_differences(g, seed):
    rng = np.random.default_rng(seed)
    B = reduced_incidence(g)
    th = rng.uniform(0.3, 2.0, g.n_edges) * rng.choice([-1, 1], g.n_edges)
    s = singular_values(jacobian(B, th))
    if len(s) > 1 and np.min(-np.diff(s)) < 1e-3 * s[0] or s[-1] < 1e-3 * s[0]:
        return  # not a smooth point
    _, gr = nuclear_norm_and_grad(B, th)
    fd = central_difference(lambda t: nuclear_norm_and_grad(B, t)[0], th, 1e-5)
    assert np.max(np.abs(gr - fd)) <= 1e-4 * max(1.0, np.max(np.abs(fd)))


def test_exact_zero_columns_get_exact_zero_gradient():
    g = mlp([2, 4, 1])
    B = reduced_incidence(g)
    th = np.random.default_rng(2).normal(size=g.n_edges)
    for e in g.in_edges(3) + g.out_edges(3):
        th[g.edge_index[e]] = 0.0
    th[0] = 0.0
    _, gr = nuclear_norm_and_grad(B, th)
    assert gr[0] == 0.0
    for e in g.in_edges(3) + g.out_edges(3):
        assert gr[g.edge_index[e]] == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
def test_shallow_nuclear_norm_is_group_norm(seed, d, h):
    g = mlp([d, h, 1])
    th = np.random.default_rng(seed).normal(size=g.n_edges)
    want = sum(2 * np.sqrt(sum(th[g.edge_index[e]] ** 2
                               for e in g.in_edges(v) + g.out_edges(v))) for v in g.hidden)
    assert nuclear_norm_and_grad(reduced_incidence(g), th)[0] == pytest.approx(want, rel=1e-10)


def test_report():
    g = mlp([2, 3, 1])
    th = np.ones(g.n_edges)
    rep = singularity_report(g, th, tau_zero=0.0)
    assert rep.rank_topological == rep.rank_numerical == 3 and not rep.singular
    for e in g.in_edges(2) + g.out_edges(2):
        th[g.edge_index[e]] = 0.0
    d = singularity_report(g, th).to_dict()
    assert d["rank_topological"] == 2 and d["singular"] and d["disconnected_sets"] == [[2]]
    assert d["singular_values"] == sorted(d["singular_values"], reverse=True)
