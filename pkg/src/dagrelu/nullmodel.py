"""Random edge-dropping null model for the number of detached neurons.

Each edge is dropped independently with probability p. Two notions of a
detached hidden neuron are supported:

``"path"`` (default)
    the neuron lies on no surviving input-to-output path, so it can be
    pruned without changing the network function;
``"quotient"``
    the neuron's component in the quotient graph (boundary glued to one
    node, dropped edges removed) misses the boundary node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dag import Dag
from .errors import TooLarge

EXACT_EDGE_CAP = 22
CRITERIA = ("path", "quotient")
_KIND = {"input": 0, "hidden": 1, "output": 2}


def _slots(dag: Dag):
    slot = {v: i + 1 for i, v in enumerate(dag.hidden)}
    ea = np.array([slot.get(dag.edge(e)[0], 0) for e in dag.edge_ids], dtype=np.int64)
    eb = np.array([slot.get(dag.edge(e)[1], 0) for e in dag.edge_ids], dtype=np.int64)
    return ea, eb


def _positions(dag: Dag):
    """Kinds by topological position and edges sorted by source position.

    Returns the permutation mapping sorted edge slots back to edge indices.
    """
    pos = {v: i for i, v in enumerate(dag.topological_order)}
    kinds = np.array([_KIND[dag.role(v)] for v in dag.topological_order], dtype=np.int64)
    es = np.array([pos[dag.edge(e)[0]] for e in dag.edge_ids], dtype=np.int64)
    ed = np.array([pos[dag.edge(e)[1]] for e in dag.edge_ids], dtype=np.int64)
    perm = np.lexsort((ed, es))
    return kinds, np.ascontiguousarray(es[perm]), np.ascontiguousarray(ed[perm]), perm


def _check_criterion(criterion):
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")


def detached_count_histogram(dag: Dag, criterion: str = "path") -> np.ndarray:
    """H[m, k]: number of edge subsets of size m whose removal detaches k neurons."""
    _check_criterion(criterion)
    if dag.n_edges > EXACT_EDGE_CAP:
        raise TooLarge(f"{dag.n_edges} edges exceed the exact-mode cap of {EXACT_EDGE_CAP}")
    if criterion == "quotient":
        ea, eb = _slots(dag)
        return kernels.impl().exact_histogram(len(dag.hidden), ea, eb)
    # subset size is permutation invariant, so the edge reordering is harmless
    kinds, es, ed, _ = _positions(dag)
    return kernels.impl().exact_histogram_dead(kinds, es, ed)


def detached_counts(dag: Dag, dropped: np.ndarray, criterion: str = "path") -> np.ndarray:
    """Detached-neuron count for each row of a boolean (samples x |E|) mask."""
    _check_criterion(criterion)
    dropped = np.asarray(dropped, dtype=bool)
    if criterion == "quotient":
        ea, eb = _slots(dag)
        return kernels.impl().disconnected_counts(
            len(dag.hidden), ea, eb, np.ascontiguousarray(dropped, dtype=np.uint8))
    kinds, es, ed, perm = _positions(dag)
    return kernels.impl().dead_counts(
        kinds, es, ed, np.ascontiguousarray(dropped[:, perm], dtype=np.uint8))


@dataclass
class NullModelResult:
    k: np.ndarray
    tail: np.ndarray           # P(#detached >= k)
    stderr: np.ndarray | None  # Monte Carlo standard errors, None in exact mode
    mode: str
    p: float
    criterion: str = "path"

    def rows(self):
        return list(zip(self.k.tolist(), self.tail.tolist()))

    def expected(self) -> float:
        # E[X] = sum_{k>=1} P(X >= k)
        return float(np.sum(self.tail[1:]))


def null_model(dag: Dag, p: float, mode: str = "exact", n: int = 100_000,
               seed: int = 0, chunk: int = 50_000,
               criterion: str = "path") -> NullModelResult:
    """Tail probabilities P(#detached >= k) for k = 0..|hidden|."""
    _check_criterion(criterion)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    H = len(dag.hidden)
    ks = np.arange(H + 1)
    if mode == "exact":
        hist = detached_count_histogram(dag, criterion).astype(float)
        E = dag.n_edges
        m = np.arange(E + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.power(p, m) * np.power(1.0 - p, E - m)
        pk = w @ hist
        tail = np.cumsum(pk[::-1])[::-1]
        tail = np.clip(tail, 0.0, 1.0)
        tail[0] = 1.0
        return NullModelResult(ks, tail, None, "exact", p, criterion)
    if mode in ("mc", "monte_carlo"):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        counts = np.zeros(H + 1, dtype=np.int64)
        done = 0
        while done < n:
            b = min(chunk, n - done)
            dropped = rng.random((b, dag.n_edges)) < p
            counts += np.bincount(detached_counts(dag, dropped, criterion), minlength=H + 1)
            done += b
        # cumulate integer counts so tail[0] is exactly 1
        tail = np.cumsum(counts[::-1])[::-1] / n
        se = np.sqrt(tail * (1.0 - tail) / n)
        return NullModelResult(ks, tail, se, "monte_carlo", p, criterion)
    raise ValueError(f"unknown mode {mode!r}")
