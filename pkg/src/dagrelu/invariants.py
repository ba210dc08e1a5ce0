"""Balance vectors and the topology of the training-invariant set.

Gradient flow keeps ``B @ theta**2`` fixed, where ``B`` is the reduced
incidence matrix. The balance vector ``c`` fixed at initialization decides
whether the set ``{theta : B theta**2 = c}`` is connected; the check runs
per bottleneck neuron, either by enumerating stable sets directly or by
solving an induced circulation problem.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .dag import (
    STABLE_SET_CAP,
    Dag,
    bottlenecks,
    enumerate_backward_stable_sets,
    enumerate_forward_stable_sets,
    pure_ancestors,
    pure_descendants,
    reduced_incidence,
)
from .errors import NotABottleneck, TooLarge
from .flow import FEAS_TOL, INF, Arc, CirculationResult, solve_circulation

Side = Literal["out", "in"]
ZERO_TOL = 1e-12
ZERO_SUM_CAP = 25


def balance(B: np.ndarray, theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    return B @ (th * th)


def conservation_residual(B: np.ndarray, theta, g) -> np.ndarray:
    """``B (theta * g)``; zero for a true loss gradient at differentiable points."""
    return B @ (np.asarray(theta, dtype=float) * np.asarray(g, dtype=float))


def _c_map(dag: Dag, c) -> dict[int, float]:
    c = np.asarray(c, dtype=float)
    if c.shape != (len(dag.hidden),):
        raise ValueError(f"balance vector needs {len(dag.hidden)} entries, got {c.shape}")
    return dict(zip(dag.hidden, c.tolist()))


# -- non-emptiness -------------------------------------------------------


def _bfs_path(dag: Dag, start: int, targets: set[int], forward: bool) -> list[int]:
    """Edge ids of a shortest path from `start` to a target; neighbours are
    expanded in ascending node id so the result is deterministic."""
    prev = {start: None}
    q = deque([start])
    while q:
        u = q.popleft()
        if u in targets:
            path = []
            while prev[u] is not None:
                e, u = prev[u]
                path.append(e)
            return path[::-1]
        edges = dag.out_edges(u) if forward else dag.in_edges(u)
        nbrs = sorted((dag.edge(e)[1 if forward else 0], e) for e in edges)
        for w, e in nbrs:
            if w not in prev:
                prev[w] = (e, u)
                q.append(w)
    raise AssertionError(f"no path from {start}; Dag invariants violated")


def feasible_construct(dag: Dag, c) -> np.ndarray:
    """A non-negative point on the invariant set of `c`.

    Starts from all-ones squared weights and corrects each hidden node with
    a path from an input (to raise its balance) or to an output (to lower
    it); intermediate nodes on a path gain equal in- and out-flow.
    """
    cm = _c_map(dag, c)
    B = reduced_incidence(dag)
    x = np.ones(dag.n_edges)
    c0 = B @ x
    for v in dag.hidden:
        delta = cm[v] - c0[dag.hidden_index[v]]
        if delta > 0:
            path = _bfs_path(dag, v, set(dag.inputs), forward=False)
        elif delta < 0:
            path = _bfs_path(dag, v, set(dag.outputs), forward=True)
        else:
            continue
        for e in path:
            x[dag.edge_index[e]] += abs(delta)
    return np.sqrt(x)


# -- induced flow problems -----------------------------------------------


@dataclass
class FlowProblem:
    """Circulation network attached to one bottleneck neuron.

    ``nodes`` are the pure ancestors (or descendants) followed by ``"s"``
    and ``"t"``; ``arcs`` keep one incoming arc per boundary-crossing edge.
    """

    bottleneck: int
    side: Side
    nodes: list
    arcs: list[Arc]

    def validate(self):
        circ = [a for a in self.arcs if a.tag == "circulation"]
        assert len(circ) == 1 and (circ[0].src, circ[0].dst) == ("t", "s")
        for a in self.arcs:
            assert a.lower <= a.upper
            if a.tag in ("source", "sink"):
                assert a.lower == a.upper
            else:
                assert a.lower == 0 and a.upper == INF


def build_flow_problem(dag: Dag, c, v: int, side: Side = "out") -> FlowProblem:
    cm = _c_map(dag, c)
    if side == "out":
        members = pure_ancestors(dag, v)
        sign = 1.0
        # arcs follow DAG direction
        def arcs_of(e):
            return dag.edge(e)
    elif side == "in":
        members = pure_descendants(dag, v)
        sign = -1.0
        def arcs_of(e):
            a, b = dag.edge(e)
            return b, a
    else:
        raise ValueError(f"side must be 'out' or 'in', got {side!r}")

    arcs: list[Arc] = []
    for e in dag.edge_ids:
        a, b = arcs_of(e)
        if a in members and b in members:
            arcs.append(Arc(a, b, 0.0, INF, "internal", e))
        elif b in members:
            arcs.append(Arc("s", b, 0.0, INF, "incoming", e))
    for w in sorted(members):
        cw = sign * cm[w]
        if cw < -ZERO_TOL:
            arcs.append(Arc("s", w, -cw, -cw, "source"))
        elif cw > ZERO_TOL:
            arcs.append(Arc(w, "t", cw, cw, "sink"))
    arcs.append(Arc("t", "s", 0.0, INF, "circulation"))
    return FlowProblem(v, side, sorted(members) + ["s", "t"], arcs)


def solve_flow_problem(p: FlowProblem) -> CirculationResult:
    return solve_circulation(p.nodes, p.arcs)


# -- connectedness -------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    bottleneck: int
    side: Side
    stable_set: frozenset
    total: float

    def to_dict(self):
        return {
            "bottleneck": self.bottleneck,
            "side": self.side,
            "stable_set": sorted(self.stable_set),
            "sum_c": self.total,
        }


@dataclass
class ConnectednessReport:
    connected: bool
    witnesses: list[Witness] = field(default_factory=list)
    backend: str = "flow"

    def to_dict(self):
        return {
            "connected": self.connected,
            "backend": self.backend,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def _violates(total: float, side: Side) -> bool:
    return total < -FEAS_TOL if side == "out" else total > FEAS_TOL


def is_stable(dag: Dag, v: int, T: Iterable[int], side: Side) -> bool:
    """Direct closure check of `T` within the pure ancestors/descendants of `v`."""
    T = set(T)
    members = pure_ancestors(dag, v) if side == "out" else pure_descendants(dag, v)
    if not T or not T <= members:
        return False
    nbrs = dag.successors if side == "out" else dag.predecessors
    return all(set(nbrs(u)) <= T for u in T if u != v)


def verify_witness(dag: Dag, c, w: Witness) -> bool:
    cm = _c_map(dag, c)
    total = sum(cm[u] for u in w.stable_set)
    return (is_stable(dag, w.bottleneck, w.stable_set, w.side)
            and _violates(total, w.side) and abs(total - w.total) <= 1e-9)


def _sides(dag: Dag):
    ins, outs = bottlenecks(dag)
    for v in sorted(outs | ins):
        if v in outs:
            yield v, "out"
        if v in ins:
            yield v, "in"


def _enumerate_check(dag: Dag, cm, v, side, cap) -> Witness | None:
    sets = (enumerate_forward_stable_sets(dag, v, cap) if side == "out"
            else enumerate_backward_stable_sets(dag, v, cap))
    worst = None
    for T in sets:
        total = sum(cm[u] for u in T)
        if _violates(total, side):
            key = total if side == "out" else -total
            if worst is None or key < worst[0]:
                worst = (key, T, total)
    if worst is None:
        return None
    return Witness(v, side, worst[1], worst[2])


def _flow_check(dag: Dag, c, cm, v, side, cap) -> Witness | None:
    res = solve_flow_problem(build_flow_problem(dag, c, v, side))
    if res.feasible:
        return None
    T = frozenset(u for u in res.cut.T if u not in ("s", "t"))
    w = Witness(v, side, T, sum(cm[u] for u in T))
    if verify_witness(dag, c, w):
        return w
    # numerical slack produced an unusable cut; fall back to enumeration
    return _enumerate_check(dag, cm, v, side, cap)


def is_connected(dag: Dag, c, backend: str = "flow",
                 cap: int = STABLE_SET_CAP) -> ConnectednessReport:
    """Decides connectedness of the invariant set for balance vector `c`.

    ``backend="enumerate"`` checks every stable set directly (exponential,
    capped); ``"flow"`` solves one circulation problem per bottleneck;
    ``"both"`` runs the two and raises ``AssertionError`` on disagreement.
    """
    if backend == "both":
        a = is_connected(dag, c, "flow", cap)
        b = is_connected(dag, c, "enumerate", cap)
        fa = [(w.bottleneck, w.side) for w in a.witnesses]
        fb = [(w.bottleneck, w.side) for w in b.witnesses]
        if a.connected != b.connected or fa != fb:
            raise AssertionError(f"backends disagree: flow={fa} enumerate={fb}")
        a.backend = "both"
        return a
    if backend not in ("flow", "enumerate"):
        raise ValueError(f"unknown backend {backend!r}")
    cm = _c_map(dag, c)
    witnesses = []
    for v, side in _sides(dag):
        if backend == "flow":
            w = _flow_check(dag, c, cm, v, side, cap)
        else:
            w = _enumerate_check(dag, cm, v, side, cap)
        if w is not None:
            witnesses.append(w)
    return ConnectednessReport(not witnesses, witnesses, backend)


# -- singularity precondition --------------------------------------------


def zero_sum_subsets(c, tol: float = 1e-12, labels: Sequence | None = None,
                     cap: int = ZERO_SUM_CAP) -> list[frozenset]:
    """All nonempty index subsets W with ``|sum(c[W])| <= tol``.

    An empty result certifies the invariant set has no singular points.
    Subsets are labelled by ``labels`` (default: positions) and returned in
    order of their bitmask.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    if n > cap:
        raise TooLarge(f"{n} hidden nodes exceed the subset-enumeration cap of {cap}")
    labels = list(range(n)) if labels is None else list(labels)
    lo_n = n // 2
    hi_n = n - lo_n

    def sums(vals):
        s = np.zeros(1)
        for x in vals:
            s = np.concatenate([s, s + x])
        return s

    lo = sums(c[:lo_n])
    hi = sums(c[lo_n:])
    masks = []
    for h in range(1 << hi_n):
        idx = np.nonzero(np.abs(lo + hi[h]) <= tol)[0]
        masks.extend(int(i) | (h << lo_n) for i in idx)
    masks = sorted(m for m in masks if m)
    return [frozenset(labels[i] for i in range(n) if m >> i & 1) for m in masks]
