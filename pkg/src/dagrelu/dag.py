"""Graph representation and topology queries for DAG networks.

Nodes and edges carry non-negative integer ids. Every ordering exposed here
(topological order ties, matrix rows/columns, set enumerations) is by
ascending id, so results are reproducible.
"""
from __future__ import annotations

import heapq
import json
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CycleDetected, InvalidDag, NotABottleneck, TooLarge

ROLES = ("input", "hidden", "output")

STABLE_SET_CAP = 20


def _kahn(node_ids: Iterable[int], pairs: Iterable[tuple[int, int]]) -> list[int]:
    succ: dict[int, list[int]] = {n: [] for n in node_ids}
    indeg = {n: 0 for n in succ}
    for a, b in pairs:
        succ[a].append(b)
        indeg[b] += 1
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    if len(order) != len(succ):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CycleDetected(f"graph has a cycle through nodes {stuck}")
    return order


class Dag:
    """Immutable feed-forward graph with input, hidden and output nodes.

    Construction validates every structural invariant: acyclicity, unique
    ids, no repeated (src, dst) pair, inputs without in-edges, outputs
    without out-edges, and hidden nodes with at least one edge on each side.
    """

    def __init__(
        self,
        nodes: Iterable[tuple[int, str]],
        edges: Iterable[tuple[int, int, int]],
    ):
        roles: dict[int, str] = {}
        for nid, role in nodes:
            nid = int(nid)
            if nid < 0:
                raise InvalidDag(f"node id {nid} is negative")
            if role not in ROLES:
                raise InvalidDag(f"node {nid}: unknown role {role!r}")
            if nid in roles:
                raise InvalidDag(f"duplicate node id {nid}")
            roles[nid] = role
        emap: dict[int, tuple[int, int]] = {}
        seen_pairs = set()
        for eid, a, b in edges:
            eid, a, b = int(eid), int(a), int(b)
            if eid < 0:
                raise InvalidDag(f"edge id {eid} is negative")
            if eid in emap:
                raise InvalidDag(f"duplicate edge id {eid}")
            if a not in roles or b not in roles:
                raise InvalidDag(f"edge {eid} references unknown node")
            if a == b:
                raise CycleDetected(f"edge {eid} is a self-loop on node {a}")
            if (a, b) in seen_pairs:
                raise InvalidDag(f"duplicate edge {a}->{b}")
            seen_pairs.add((a, b))
            emap[eid] = (a, b)

        self._roles = roles
        self._edges = emap
        self.node_ids: tuple[int, ...] = tuple(sorted(roles))
        self.edge_ids: tuple[int, ...] = tuple(sorted(emap))
        self.topological_order: tuple[int, ...] = tuple(
            _kahn(self.node_ids, (emap[e] for e in self.edge_ids))
        )

        ins: dict[int, list[int]] = {n: [] for n in self.node_ids}
        outs: dict[int, list[int]] = {n: [] for n in self.node_ids}
        for e in self.edge_ids:
            a, b = emap[e]
            outs[a].append(e)
            ins[b].append(e)
        self._in = {n: tuple(v) for n, v in ins.items()}
        self._out = {n: tuple(v) for n, v in outs.items()}

        for n, role in roles.items():
            din, dout = len(self._in[n]), len(self._out[n])
            if role == "input" and din:
                raise InvalidDag(f"input node {n} has incoming edges")
            if role == "output" and dout:
                raise InvalidDag(f"output node {n} has outgoing edges")
            if role == "hidden" and (din == 0 or dout == 0):
                raise InvalidDag(
                    f"hidden node {n} needs in- and out-edges (in={din}, out={dout})"
                )

        self.inputs = tuple(n for n in self.node_ids if roles[n] == "input")
        self.hidden = tuple(n for n in self.node_ids if roles[n] == "hidden")
        self.outputs = tuple(n for n in self.node_ids if roles[n] == "output")
        self.edge_index = {e: i for i, e in enumerate(self.edge_ids)}
        self.hidden_index = {v: i for i, v in enumerate(self.hidden)}
        self._hash = hash((tuple(self.nodes), tuple(self.edges)))

    # -- basic accessors -------------------------------------------------

    def role(self, n: int) -> str:
        return self._roles[n]

    def edge(self, e: int) -> tuple[int, int]:
        return self._edges[e]

    @property
    def edges(self) -> list[tuple[int, int, int]]:
        return [(e, *self._edges[e]) for e in self.edge_ids]

    @property
    def nodes(self) -> list[tuple[int, str]]:
        return [(n, self._roles[n]) for n in self.node_ids]

    def in_edges(self, n: int) -> tuple[int, ...]:
        return self._in[n]

    def out_edges(self, n: int) -> tuple[int, ...]:
        return self._out[n]

    def predecessors(self, n: int) -> list[int]:
        return sorted(self._edges[e][0] for e in self._in[n])

    def successors(self, n: int) -> list[int]:
        return sorted(self._edges[e][1] for e in self._out[n])

    def in_degree(self, n: int) -> int:
        return len(self._in[n])

    def out_degree(self, n: int) -> int:
        return len(self._out[n])

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @cached_property
    def src(self) -> np.ndarray:
        return np.array([self._edges[e][0] for e in self.edge_ids], dtype=np.int64)

    @cached_property
    def dst(self) -> np.ndarray:
        return np.array([self._edges[e][1] for e in self.edge_ids], dtype=np.int64)

    def reversed(self) -> "Dag":
        """Same graph with every edge flipped and input/output roles swapped."""
        swap = {"input": "output", "output": "input", "hidden": "hidden"}
        return Dag(
            [(n, swap[r]) for n, r in self.nodes],
            [(e, b, a) for e, a, b in self.edges],
        )

    def subgraph(self, keep_nodes: Iterable[int]) -> "Dag":
        keep = set(keep_nodes)
        return Dag(
            [(n, r) for n, r in self.nodes if n in keep],
            [(e, a, b) for e, a, b in self.edges if a in keep and b in keep],
        )

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return (
            f"Dag(|V_I|={len(self.inputs)}, |V_H|={len(self.hidden)}, "
            f"|V_O|={len(self.outputs)}, |E|={self.n_edges})"
        )

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "role": r} for n, r in self.nodes],
            "edges": [{"id": e, "src": a, "dst": b} for e, a, b in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Dag":
        if not isinstance(data, Mapping):
            raise InvalidDag("graph document must be a JSON object")
        extra = set(data) - {"nodes", "edges"}
        if extra:
            raise InvalidDag(f"unknown top-level keys: {sorted(extra)}")
        if "nodes" not in data or "edges" not in data:
            raise InvalidDag("graph document needs 'nodes' and 'edges'")
        nodes, edges = [], []
        for item in data["nodes"]:
            _check_keys(item, {"id", "role"}, "node")
            nodes.append((_as_id(item["id"]), item["role"]))
        for item in data["edges"]:
            _check_keys(item, {"id", "src", "dst"}, "edge")
            edges.append((_as_id(item["id"]), _as_id(item["src"]), _as_id(item["dst"])))
        return cls(nodes, edges)

    @classmethod
    def from_json(cls, text: str) -> "Dag":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _check_keys(item, allowed, what):
    if not isinstance(item, Mapping):
        raise InvalidDag(f"{what} entry must be an object")
    keys = set(item)
    if keys != allowed:
        raise InvalidDag(
            f"{what} entry has keys {sorted(keys)}, expected {sorted(allowed)}"
        )


def _as_id(x):
    if isinstance(x, bool) or not isinstance(x, int):
        raise InvalidDag(f"id {x!r} is not an integer")
    return x


# -- incidence algebra ---------------------------------------------------


def topological_order(dag: Dag) -> list[int]:
    return list(dag.topological_order)


def reduced_incidence(dag: Dag) -> np.ndarray:
    """|hidden| x |E| incidence matrix with boundary rows removed.

    Entry (v, (i, j)) is +1 if v == j, -1 if v == i, else 0.
    """
    B = np.zeros((len(dag.hidden), dag.n_edges), dtype=np.int64)
    for col, e in enumerate(dag.edge_ids):
        a, b = dag.edge(e)
        if a in dag.hidden_index:
            B[dag.hidden_index[a], col] = -1
        if b in dag.hidden_index:
            B[dag.hidden_index[b], col] = 1
    return B


# -- bottlenecks and pure ancestry ---------------------------------------


def bottlenecks(dag: Dag) -> tuple[set[int], set[int]]:
    """Hidden nodes with in-degree 1 and with out-degree 1, respectively."""
    ins = {v for v in dag.hidden if dag.in_degree(v) == 1}
    outs = {v for v in dag.hidden if dag.out_degree(v) == 1}
    return ins, outs


def _reaches(dag: Dag, targets: set[int], removed: int, forward: bool) -> set[int]:
    """Nodes that can reach `targets` (forward=True) without visiting `removed`."""
    seen = set(t for t in targets if t != removed)
    stack = list(seen)
    while stack:
        n = stack.pop()
        nbrs = dag.predecessors(n) if forward else dag.successors(n)
        for m in nbrs:
            if m != removed and m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def ancestors(dag: Dag, v: int) -> set[int]:
    seen, stack = set(), [v]
    while stack:
        for m in dag.predecessors(stack.pop()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def descendants(dag: Dag, v: int) -> set[int]:
    seen, stack = set(), [v]
    while stack:
        for m in dag.successors(stack.pop()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def pure_ancestors(dag: Dag, v: int, force: bool = False) -> set[int]:
    """Hidden ancestors of `v` (and `v` itself) whose every route to an
    output passes through `v`.

    Only meaningful for out-bottlenecks; pass ``force=True`` to evaluate it
    for any hidden node.
    """
    if dag.role(v) != "hidden":
        raise NotABottleneck(f"node {v} is not hidden")
    if not force and dag.out_degree(v) != 1:
        raise NotABottleneck(f"node {v} has out-degree {dag.out_degree(v)}")
    escape = _reaches(dag, set(dag.outputs), v, forward=True)
    anc = ancestors(dag, v)
    return {w for w in anc if dag.role(w) == "hidden" and w not in escape} | {v}


def pure_descendants(dag: Dag, v: int, force: bool = False) -> set[int]:
    """Mirror of :func:`pure_ancestors` for in-bottlenecks."""
    if dag.role(v) != "hidden":
        raise NotABottleneck(f"node {v} is not hidden")
    if not force and dag.in_degree(v) != 1:
        raise NotABottleneck(f"node {v} has in-degree {dag.in_degree(v)}")
    escape = _reaches(dag, set(dag.inputs), v, forward=False)
    desc = descendants(dag, v)
    return {w for w in desc if dag.role(w) == "hidden" and w not in escape} | {v}


def _stable_sets(members: set[int], v: int, nbrs, cap: int) -> list[frozenset[int]]:
    if len(members) > cap:
        raise TooLarge(
            f"{len(members)} pure ancestors/descendants exceed the cap of {cap}"
        )
    order = sorted(members)
    bit = {u: 1 << i for i, u in enumerate(order)}
    # u != v may join T only if all of its neighbours (within the side) are in T
    need = {}
    for u in order:
        m = 0
        for w in nbrs(u):
            if w not in bit:
                m = -1
                break
            m |= bit[w]
        need[u] = m

    # depth-first over the closure lattice; the neighbours of u always come
    # before u in `seq`, so include/exclude decisions are final.
    seq = [v] + [u for u in order if u != v]
    seq = _closure_order(seq, need, bit)
    out: list[int] = []

    def rec(i: int, mask: int):
        if i == len(seq):
            if mask:
                out.append(mask)
            return
        u = seq[i]
        rec(i + 1, mask)
        if u == v or (need[u] >= 0 and need[u] & ~mask == 0):
            rec(i + 1, mask | bit[u])

    rec(0, 0)
    sets = [frozenset(u for u in order if mask & bit[u]) for mask in out]
    sets.sort(key=lambda s: (len(s), sorted(s)))
    return sets


def _closure_order(seq, need, bit):
    # topological order of the "needs" relation restricted to seq
    inv = {b: u for u, b in bit.items()}
    pairs = []
    for u in seq:
        m = need[u]
        if m > 0:
            for b, w in inv.items():
                if m & b:
                    pairs.append((w, u))
    order = _kahn(seq, pairs)
    return order


def enumerate_forward_stable_sets(
    dag: Dag, v: int, cap: int = STABLE_SET_CAP
) -> list[frozenset[int]]:
    """All nonempty subsets T of the pure ancestors of out-bottleneck `v`
    such that every u in T other than v has all of its out-neighbours in T."""
    pa = pure_ancestors(dag, v)
    return _stable_sets(pa, v, dag.successors, cap)


def enumerate_backward_stable_sets(
    dag: Dag, v: int, cap: int = STABLE_SET_CAP
) -> list[frozenset[int]]:
    pd = pure_descendants(dag, v)
    return _stable_sets(pd, v, dag.predecessors, cap)


# -- quotient graph ------------------------------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _quotient_uf(dag: Dag, zero_edges) -> _UnionFind:
    # slot 0 is the glued boundary super-node, hidden node k sits at k + 1
    zero = set(zero_edges)
    uf = _UnionFind(len(dag.hidden) + 1)
    slot = {v: i + 1 for i, v in enumerate(dag.hidden)}
    for e in dag.edge_ids:
        if e in zero:
            continue
        a, b = dag.edge(e)
        uf.union(slot.get(a, 0), slot.get(b, 0))
    return uf


def quotient_components(dag: Dag, zero_edges: Iterable[int] = ()) -> int:
    """Connected components after gluing all boundary nodes into one,
    dropping `zero_edges` and forgetting direction."""
    uf = _quotient_uf(dag, zero_edges)
    return len({uf.find(i) for i in range(len(dag.hidden) + 1)})


def detached_hidden_sets(dag: Dag, zero_edges: Iterable[int] = ()) -> list[frozenset[int]]:
    """Quotient components that do not contain the boundary super-node."""
    uf = _quotient_uf(dag, zero_edges)
    root = uf.find(0)
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(dag.hidden):
        r = uf.find(i + 1)
        if r != root:
            groups.setdefault(r, []).append(v)
    sets = [frozenset(g) for g in groups.values()]
    sets.sort(key=lambda s: min(s))
    return sets


# -- builders ------------------------------------------------------------


def mlp(widths: Sequence[int], skip: Sequence[tuple[int, int]] = ()) -> Dag:
    """Fully connected layered network.

    ``widths[0]`` inputs, ``widths[-1]`` outputs. Node ids run layer by layer
    starting at 0; edge ids follow (src, dst) order. ``skip`` lists extra
    fully connected layer pairs (i, j) with j > i + 1.
    """
    layers, nxt = [], 0
    for w in widths:
        layers.append(list(range(nxt, nxt + w)))
        nxt += w
    nodes = []
    for li, layer in enumerate(layers):
        role = "input" if li == 0 else "output" if li == len(layers) - 1 else "hidden"
        nodes += [(n, role) for n in layer]
    pairs = []
    for li in range(len(layers) - 1):
        pairs += [(a, b) for a in layers[li] for b in layers[li + 1]]
    for i, j in skip:
        pairs += [(a, b) for a in layers[i] for b in layers[j]]
    pairs.sort()
    return Dag(nodes, [(k, a, b) for k, (a, b) in enumerate(pairs)])


def chain(n_hidden: int = 1) -> Dag:
    """input -> h_1 -> ... -> h_n -> output with ids 0..n+1."""
    n = n_hidden + 2
    nodes = [(0, "input")] + [(i, "hidden") for i in range(1, n - 1)] + [(n - 1, "output")]
    return Dag(nodes, [(i, i, i + 1) for i in range(n - 1)])


def toy_dag() -> Dag:
    """Three-hidden-node toy network used for the connectedness obstruction.

    Inputs 0 and 1, hidden 2, 3, 4, output 5. Neuron 4 is an out-bottleneck
    whose pure ancestors are {2, 3, 4}; the edge ids are
    0:(0,2) 1:(1,2) 2:(1,3) 3:(2,3) 4:(2,4) 5:(3,4) 6:(4,5).
    """
    nodes = [(0, "input"), (1, "input"), (2, "hidden"), (3, "hidden"),
             (4, "hidden"), (5, "output")]
    pairs = [(0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (4, 5)]
    return Dag(nodes, [(k, a, b) for k, (a, b) in enumerate(pairs)])


def toy_init(theta_e: float) -> np.ndarray:
    """Initial weights giving balance (theta_e**2 - 6, 1, 3) on the toy net."""
    return np.array([theta_e, 1.0, 1.0, 1.0, np.sqrt(6.0), 1.0, 2.0])


def random_dag(
    rng: np.random.Generator,
    n_inputs: int,
    n_hidden: int,
    n_outputs: int,
    p: float = 0.3,
    allow_io_edges: bool = False,
) -> Dag:
    """Random valid DAG; hidden nodes are repaired to have both degrees >= 1.

    Inputs get ids 0.., hidden nodes follow in a random topological order,
    outputs come last.
    """
    ins = list(range(n_inputs))
    hid = list(range(n_inputs, n_inputs + n_hidden))
    outs = list(range(n_inputs + n_hidden, n_inputs + n_hidden + n_outputs))
    order = ins + hid + outs
    pos = {n: i for i, n in enumerate(order)}
    pairs = set()
    for a in ins + hid:
        for b in hid + outs:
            if pos[b] <= pos[a]:
                continue
            if a in ins and b in outs and not allow_io_edges:
                continue
            if rng.random() < p:
                pairs.add((a, b))
    for h in hid:
        if not any(b == h for _, b in pairs):
            cands = ins + [x for x in hid if pos[x] < pos[h]]
            pairs.add((int(rng.choice(cands)), h))
        if not any(a == h for a, _ in pairs):
            cands = [x for x in hid if pos[x] > pos[h]] + outs
            pairs.add((h, int(rng.choice(cands))))
    edges = [(k, a, b) for k, (a, b) in enumerate(sorted(pairs))]
    nodes = ([(n, "input") for n in ins] + [(n, "hidden") for n in hid]
             + [(n, "output") for n in outs])
    return Dag(nodes, edges)
