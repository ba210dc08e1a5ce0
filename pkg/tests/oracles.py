"""Slow, independent reference implementations used only by the tests.

None of these import the code paths they check.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# -- linear algebra --------------------------------------------------------


def jacobi_eigvalsh(A, tol=1e-15, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(A * A) - np.sum(np.diag(A) ** 2))
        if off <= tol * max(1.0, np.linalg.norm(A)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-20 * (abs(A[p, p]) + abs(A[q, q])):
                    # negligible; rotating would only amplify rounding
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
    return np.sort(np.diag(A))[::-1]


def singular_values_via_gram(M):
    """Singular values from the eigenvalues of the smaller Gram matrix."""
    M = np.asarray(M, dtype=float)
    G = M @ M.T if M.shape[0] <= M.shape[1] else M.T @ M
    ev = jacobi_eigvalsh(G)
    return np.sqrt(np.clip(ev, 0.0, None))


def central_difference(f, x, eps=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


# -- graphs ----------------------------------------------------------------


def incidence_from_edges(hidden, edges):
    """B[v, e] = +1 if e enters v, -1 if e leaves v (hidden rows only)."""
    row = {v: i for i, v in enumerate(hidden)}
    B = np.zeros((len(hidden), len(edges)), dtype=int)
    for j, (_, a, b) in enumerate(edges):
        if b in row:
            B[row[b], j] += 1
        if a in row:
            B[row[a], j] -= 1
    return B


def all_paths(succ, start, targets):
    out = []

    def dfs(u, path):
        if u in targets:
            out.append(path)
        for w in succ.get(u, ()):
            dfs(w, path + [w])

    dfs(start, [start])
    return out


def pure_ancestors_by_paths(nodes, edges, v):
    """Hidden w (or v) reaching v such that every path w -> output visits v."""
    succ = {}
    for _, a, b in edges:
        succ.setdefault(a, []).append(b)
    outputs = {n for n, r in nodes if r == "output"}
    hidden = [n for n, r in nodes if r == "hidden"]
    res = {v}
    for w in hidden:
        if w == v:
            continue
        paths = all_paths(succ, w, outputs)
        if paths and all(v in p for p in paths):
            res.add(w)
    return res


def stable_sets_by_powerset(members, v, succ):
    """All nonempty T within `members` with N+(u) inside T for u in T minus v."""
    members = sorted(members)
    out = []
    for r in range(1, len(members) + 1):
        for T in itertools.combinations(members, r):
            Ts = set(T)
            if all(set(succ.get(u, ())) <= Ts for u in Ts if u != v):
                out.append(frozenset(Ts))
    return out


def components_excluding_boundary(nodes, edges, dropped):
    """Hidden-node groups cut from the glued boundary, by plain BFS."""
    role = dict(nodes)
    adj = {n: set() for n, _ in nodes}
    for e, a, b in edges:
        if e in dropped:
            continue
        adj[a].add(b)
        adj[b].add(a)
    seen = set()
    stack = [n for n, r in nodes if r != "hidden"]
    seen.update(stack)
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    rest = [n for n, r in nodes if r == "hidden" and n not in seen]
    groups = []
    left = set(rest)
    while left:
        s = min(left)
        comp = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in left and w not in comp:
                    comp.add(w)
                    stack.append(w)
        groups.append(frozenset(comp))
        left -= comp
    return groups


def dead_hidden(nodes, edges, dropped):
    """Hidden nodes on no surviving input -> output path."""
    alive = [(a, b) for e, a, b in edges if e not in dropped]
    role = dict(nodes)

    def closure(starts, pairs):
        seen = set(starts)
        changed = True
        while changed:
            changed = False
            for a, b in pairs:
                if a in seen and b not in seen:
                    seen.add(b)
                    changed = True
        return seen

    fwd = closure([n for n in role if role[n] == "input"], alive)
    bwd = closure([n for n in role if role[n] == "output"], [(b, a) for a, b in alive])
    return {n for n in role if role[n] == "hidden" and not (n in fwd and n in bwd)}


def null_model_tail(nodes, edges, p, criterion="path"):
    """P(#detached >= k) by explicit enumeration of all drop patterns."""
    H = sum(1 for _, r in nodes if r == "hidden")
    E = len(edges)
    pk = np.zeros(H + 1)
    ids = [e for e, _, _ in edges]
    for mask in range(1 << E):
        dropped = {ids[i] for i in range(E) if mask >> i & 1}
        m = len(dropped)
        w = p ** m * (1 - p) ** (E - m)
        if criterion == "path":
            k = len(dead_hidden(nodes, edges, dropped))
        else:
            k = sum(len(g) for g in components_excluding_boundary(nodes, edges, dropped))
        pk[k] += w
    return np.cumsum(pk[::-1])[::-1]


# -- flows -----------------------------------------------------------------


def circulation_feasible_lp(node_list, arcs):
    """Feasibility of a lower/upper-bounded circulation by linear programming.

    ``arcs`` is a list of (src, dst, lower, upper) with upper possibly inf.
    """
    from scipy.optimize import linprog

    idx = {n: i for i, n in enumerate(node_list)}
    m = len(arcs)
    if m == 0:
        return True
    A = np.zeros((len(node_list), m))
    for j, (a, b, _, _) in enumerate(arcs):
        A[idx[a], j] -= 1.0
        A[idx[b], j] += 1.0
    bounds = [(lo, None if math.isinf(hi) else hi) for _, _, lo, hi in arcs]
    res = linprog(np.zeros(m), A_eq=A, b_eq=np.zeros(len(node_list)), bounds=bounds,
                  method="highs")
    return res.status == 0


def hoffman_feasible_bruteforce(node_list, arcs):
    """Hoffman: feasible iff every cut has sum(l over S->T) <= sum(u over T->S)."""
    n = len(node_list)
    for r in range(1, n):
        for S in itertools.combinations(node_list, r):
            S = set(S)
            lo = sum(l for a, b, l, _ in arcs if a in S and b not in S)
            hi = sum(u for a, b, _, u in arcs if a not in S and b in S)
            if lo > hi + 1e-9:
                return False
    return True


def max_flow_lp(n, edges, s, t):
    """Max s-t flow value on a capacitated digraph via linprog."""
    from scipy.optimize import linprog

    m = len(edges)
    if m == 0:
        return 0.0
    A = np.zeros((n, m))
    c = np.zeros(m)
    for j, (a, b, _) in enumerate(edges):
        A[a, j] -= 1.0
        A[b, j] += 1.0
        if a == s:
            c[j] -= 1.0
        if b == s:
            c[j] += 1.0
    keep = [i for i in range(n) if i not in (s, t)]
    res = linprog(c, A_eq=A[keep], b_eq=np.zeros(len(keep)),
                  bounds=[(0, cap) for _, _, cap in edges], method="highs")
    return -res.fun
