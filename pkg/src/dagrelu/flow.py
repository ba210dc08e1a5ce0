"""Max-flow (Dinic) and lower-bounded circulation feasibility.

The circulation solver reduces lower bounds to a max-flow problem between
a super-source and a super-sink. When the demands cannot all be routed, the
residual reachability set yields a cut (S, T) of strictly positive Hoffman
value

    V(S, T) = sum_{i in S, j in T} l_ij - sum_{i in T, j in S} m_ij,

which certifies infeasibility.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .errors import MalformedProblem

INF = math.inf
FEAS_TOL = 1e-9


class MaxFlow:
    """Dinic's algorithm on an adjacency-list residual graph of floats."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []

    def add_edge(self, u: int, v: int, cap: float) -> int:
        """Adds u -> v; returns the index of the forward residual arc."""
        k = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0.0]
        self.head[u].append(k)
        self.head[v].append(k + 1)
        return k

    def _bfs(self, s: int, t: int, eps: float):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for k in self.head[u]:
                w = self.to[k]
                if level[w] < 0 and self.cap[k] > eps:
                    level[w] = level[u] + 1
                    q.append(w)
        return level if level[t] >= 0 else None

    def _dfs(self, u, t, pushed, level, it, eps):
        if u == t:
            return pushed
        while it[u] < len(self.head[u]):
            k = self.head[u][it[u]]
            w = self.to[k]
            if self.cap[k] > eps and level[w] == level[u] + 1:
                got = self._dfs(w, t, min(pushed, self.cap[k]), level, it, eps)
                if got > 0:
                    if self.cap[k] != INF:
                        self.cap[k] -= got
                    if self.cap[k ^ 1] != INF:
                        self.cap[k ^ 1] += got
                    return got
            it[u] += 1
        return 0.0

    def run(self, s: int, t: int, eps: float = 1e-12) -> float:
        total = 0.0
        while True:
            level = self._bfs(s, t, eps)
            if level is None:
                return total
            it = [0] * self.n
            while True:
                got = self._dfs(s, t, INF, level, it, eps)
                if got <= 0:
                    break
                total += got

    def reachable(self, s: int, eps: float = 1e-12) -> set[int]:
        seen = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            for k in self.head[u]:
                w = self.to[k]
                if w not in seen and self.cap[k] > eps:
                    seen.add(w)
                    q.append(w)
        return seen


@dataclass(frozen=True)
class Arc:
    src: Hashable
    dst: Hashable
    lower: float
    upper: float
    tag: str = "internal"
    edge: int | None = None  # originating DAG edge, if any


@dataclass
class CutCertificate:
    S: frozenset
    T: frozenset
    value: float


@dataclass
class CirculationResult:
    feasible: bool
    flow: list[float] | None = None
    cut: CutCertificate | None = None


def cut_value(arcs: Sequence[Arc], S, T) -> float:
    S, T = set(S), set(T)
    v = 0.0
    for a in arcs:
        if a.src in S and a.dst in T:
            v += a.lower
        elif a.src in T and a.dst in S:
            v -= a.upper
    return v


def check_flow(nodes, arcs: Sequence[Arc], flow: Sequence[float], tol: float = FEAS_TOL) -> bool:
    bal = {n: 0.0 for n in nodes}
    for a, f in zip(arcs, flow):
        if f < a.lower - tol or f > a.upper + tol:
            return False
        bal[a.dst] += f
        bal[a.src] -= f
    return all(abs(b) <= tol for b in bal.values())


def solve_circulation(nodes: Sequence[Hashable], arcs: Sequence[Arc],
                      tol: float = FEAS_TOL) -> CirculationResult:
    """Decides whether a flow with conservation at every node and
    ``lower <= f <= upper`` on every arc exists."""
    index = {n: i for i, n in enumerate(nodes)}
    if len(index) != len(nodes):
        raise MalformedProblem("duplicate node labels")
    for a in arcs:
        if a.src not in index or a.dst not in index:
            raise MalformedProblem(f"arc {a} references unknown node")
        if not (a.lower >= 0 and a.lower <= a.upper) or math.isnan(a.upper):
            raise MalformedProblem(f"arc {a.src}->{a.dst} has bounds [{a.lower}, {a.upper}]")
        if math.isinf(a.lower):
            raise MalformedProblem("infinite lower bound")

    n = len(nodes)
    S_, T_ = n, n + 1
    mf = MaxFlow(n + 2)
    excess = [0.0] * n
    arc_ids = []
    for a in arcs:
        u, v = index[a.src], index[a.dst]
        arc_ids.append(mf.add_edge(u, v, a.upper - a.lower))
        excess[v] += a.lower
        excess[u] -= a.lower
    demand = 0.0
    for i, x in enumerate(excess):
        if x > 0:
            mf.add_edge(S_, i, x)
            demand += x
        elif x < 0:
            mf.add_edge(i, T_, -x)
    pushed = mf.run(S_, T_)

    if pushed >= demand - tol:
        flow = []
        for a, k in zip(arcs, arc_ids):
            # flow on the arc equals the residual capacity of its reverse arc
            flow.append(a.lower + mf.cap[k ^ 1])
        return CirculationResult(True, flow=flow)

    reach = mf.reachable(S_)
    T = frozenset(nodes[i] for i in reach if i < n)
    S = frozenset(nodes) - T
    return CirculationResult(False, cut=CutCertificate(S, T, cut_value(arcs, S, T)))
