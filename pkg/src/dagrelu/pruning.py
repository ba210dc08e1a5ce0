"""Neuron removal by prune score and the resulting loss curves."""
from __future__ import annotations

import numpy as np

from .dag import Dag
from .network import RELU, Activation, Dataset, loss
from .trainer import prune_scores


def prune_order(dag: Dag, theta, order: str = "s") -> list[int]:
    """Hidden nodes sorted by ascending score, ties broken by node id."""
    s, smax = prune_scores(dag, theta)
    if order == "s":
        sc = s
    elif order == "s_max":
        sc = smax
    else:
        raise ValueError(f"unknown prune order {order!r}")
    return [v for _, v in sorted(zip(sc.tolist(), dag.hidden))]


def remove_hidden(dag: Dag, theta, drop) -> tuple[Dag, np.ndarray, list[int]]:
    """Deletes hidden nodes `drop` and their edges, then keeps deleting any
    hidden node left without in- or out-edges. Returns the stranded extras."""
    th = np.asarray(theta, dtype=float)
    gone = set(drop)
    stranded = []
    nodes = dict(dag.nodes)
    edges = {e: (a, b) for e, a, b in dag.edges}
    while True:
        edges = {e: (a, b) for e, (a, b) in edges.items()
                 if a not in gone and b not in gone}
        has_in = {b for a, b in edges.values()}
        has_out = {a for a, b in edges.values()}
        extra = [v for v, r in nodes.items() if r == "hidden" and v not in gone
                 and (v not in has_in or v not in has_out)]
        if not extra:
            break
        stranded += extra
        gone.update(extra)
    new = Dag([(n, r) for n, r in sorted(nodes.items()) if n not in gone],
              [(e, a, b) for e, (a, b) in sorted(edges.items())])
    keep = [dag.edge_index[e] for e in new.edge_ids]
    return new, th[keep], sorted(stranded)


def prune_neurons(dag: Dag, theta, order: str = "s", k: int = 0):
    """Removes the `k` lowest-scoring hidden nodes.

    Returns ``(dag', theta', stranded)`` where ``stranded`` lists further
    hidden nodes removed because they lost all in- or out-edges.
    """
    if not 0 <= k <= len(dag.hidden):
        raise ValueError(f"k must lie in [0, {len(dag.hidden)}]")
    drop = prune_order(dag, theta, order)[:k]
    return remove_hidden(dag, theta, drop)


def prune_curve(dag: Dag, theta, data: Dataset, order: str = "s",
                kind: str = "mse", act: Activation = RELU, ks=None) -> list[tuple[int, float]]:
    """Loss after removing the k lowest-scoring neurons, k = 0..|hidden|.

    The removal order is fixed from the scores of the unpruned network, so
    each pruned network contains the previous one.
    """
    ranked = prune_order(dag, theta, order)
    ks = range(len(dag.hidden) + 1) if ks is None else ks
    out = []
    for k in ks:
        d2, th2, _ = remove_hidden(dag, theta, ranked[:k])
        out.append((k, loss(d2, act, th2, data, kind)))
    return out
