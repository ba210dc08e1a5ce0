import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import circulation_feasible_lp, hoffman_feasible_bruteforce, max_flow_lp
from dagrelu.errors import MalformedProblem
from dagrelu.flow import INF, Arc, MaxFlow, check_flow, cut_value, solve_circulation


def test_max_flow_textbook():
    mf = MaxFlow(4)
    for u, v, c in [(0, 1, 3), (0, 2, 2), (1, 2, 1), (1, 3, 2), (2, 3, 3)]:
        mf.add_edge(u, v, c)
    assert mf.run(0, 3) == 5


@given(st.integers(0, 2**32 - 1), st.integers(3, 7))
def test_max_flow_matches_linear_program(seed, n):
    rng = np.random.default_rng(seed)
    edges = [(a, b, float(rng.integers(1, 10)))
             for a in range(n) for b in range(n) if a != b and rng.random() < 0.4]
    mf = MaxFlow(n)
    for a, b, c in edges:
        mf.add_edge(a, b, c)
    assert mf.run(0, n - 1) == pytest.approx(max_flow_lp(n, edges, 0, n - 1), abs=1e-7)


def test_zero_lower_bounds_always_feasible():
    arcs = [Arc("a", "b", 0, INF), Arc("b", "a", 0, 3.0)]
    res = solve_circulation(["a", "b"], arcs)
    assert res.feasible and check_flow(["a", "b"], arcs, res.flow)


def test_dead_end_supply_is_infeasible():
    arcs = [Arc("s", "w", 5, 5, "source"), Arc("t", "s", 0, INF, "circulation")]
    res = solve_circulation(["w", "s", "t"], arcs)
    assert not res.feasible
    assert "w" in res.cut.T and res.cut.value > 0
    assert res.cut.value == pytest.approx(cut_value(arcs, res.cut.S, res.cut.T))


@pytest.mark.parametrize("arc", [
    Arc("a", "b", 2.0, 1.0), Arc("a", "b", -1.0, 1.0), Arc("a", "b", 0.0, math.nan),
    Arc("a", "z", 0.0, 1.0),
])
def test_malformed_problems(arc):
    with pytest.raises(MalformedProblem):
        solve_circulation(["a", "b"], [arc])


@st.composite
def circulations(draw):
    n = draw(st.integers(2, 6))
    nodes = list(range(n))
    arcs = []
    for a in nodes:
        for b in nodes:
            if a == b or not draw(st.booleans()):
                continue
            lo = float(draw(st.integers(0, 4)))
            hi = draw(st.sampled_from([INF, lo, lo + 1.0, lo + 3.0]))
            arcs.append(Arc(a, b, lo, hi))
    return nodes, arcs


@given(circulations())
def test_circulation_matches_lp_and_hoffman(problem):
    nodes, arcs = problem
    res = solve_circulation(nodes, arcs)
    plain = [(a.src, a.dst, a.lower, a.upper) for a in arcs]
    assert res.feasible == circulation_feasible_lp(nodes, plain)
    assert res.feasible == hoffman_feasible_bruteforce(nodes, plain)
    if res.feasible:
        assert check_flow(nodes, arcs, res.flow)
    else:
        assert res.cut.value > 0
        assert res.cut.S | res.cut.T == frozenset(nodes)
        assert not res.cut.S & res.cut.T
