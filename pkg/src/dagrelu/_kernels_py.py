"""Pure numpy kernels; reference implementation and import-time fallback.

Array conventions shared with the compiled module:

* nodes are addressed by topological position ``p``;
* ``kinds[p]`` is 0 (input), 1 (hidden) or 2 (output);
* in-edges of node ``p`` are ``in_src[indptr[p]:indptr[p+1]]`` (source
  positions) with weights ``theta[in_edge[...]]``;
* quotient-graph edges use slot 0 for the glued boundary and ``1..H`` for
  hidden nodes.
"""
import numpy as np

MSE, LOGISTIC = 0, 1


def _act(z, gamma):
    return np.where(z > 0, z, gamma * z)


def _dact(z, gamma):
    return np.where(z > 0, 1.0, gamma)


def forward_batch(indptr, in_src, in_edge, kinds, input_pos, theta, X, gamma):
    N = X.shape[0]
    n = kinds.shape[0]
    A = np.zeros((N, n))
    Z = np.zeros((N, n))
    A[:, input_pos] = X
    for p in range(n):
        if kinds[p] == 0:
            continue
        # accumulate edge by edge, in edge order, like the compiled loop;
        # a BLAS dot would regroup the sum and break exact-zero pruning
        z = np.zeros(N)
        for k in range(indptr[p], indptr[p + 1]):
            z += theta[in_edge[k]] * A[:, in_src[k]]
        Z[:, p] = z
        A[:, p] = _act(z, gamma) if kinds[p] == 1 else z
    return A, Z


def loss_grad(indptr, in_src, in_edge, kinds, input_pos, output_pos,
              theta, X, Y, loss_kind, gamma):
    N = X.shape[0]
    A, Z = forward_batch(indptr, in_src, in_edge, kinds, input_pos, theta, X, gamma)
    Yh = A[:, output_pos]
    if loss_kind == MSE:
        r = Yh - Y
        loss = 0.5 * np.sum(r * r) / N
        dY = r / N
    else:
        loss = np.sum(np.logaddexp(0.0, Yh) - Y * Yh) / N
        dY = (0.5 * (1.0 + np.tanh(0.5 * Yh)) - Y) / N
    dA = np.zeros_like(A)
    dA[:, output_pos] = dY
    grad = np.zeros(theta.shape[0])
    for p in range(kinds.shape[0] - 1, -1, -1):
        if kinds[p] == 0:
            continue
        dz = dA[:, p] if kinds[p] == 2 else dA[:, p] * _dact(Z[:, p], gamma)
        lo, hi = indptr[p], indptr[p + 1]
        if hi == lo:
            continue
        srcs = in_src[lo:hi]
        eidx = in_edge[lo:hi]
        grad[eidx] += A[:, srcs].T @ dz
        dA[:, srcs] += np.outer(dz, theta[eidx])
    return float(loss), grad


def disconnected_counts(n_hidden, ea, eb, dropped):
    """Number of hidden slots cut off from slot 0, one per row of `dropped`."""
    dropped = np.asarray(dropped, dtype=bool)
    M = dropped.shape[0]
    alive = ~dropped
    reach = np.zeros((M, n_hidden + 1), dtype=bool)
    reach[:, 0] = True
    for _ in range(n_hidden + 1):
        before = reach.sum()
        for e in range(len(ea)):
            a, b = ea[e], eb[e]
            r = alive[:, e] & (reach[:, a] | reach[:, b])
            reach[:, a] |= r
            reach[:, b] |= r
        if reach.sum() == before:
            break
    return (n_hidden - reach[:, 1:].sum(axis=1)).astype(np.int64)


def dead_counts(kinds, es, ed, dropped):
    """Number of hidden nodes on no surviving input-to-output path.

    Nodes are topological positions; edges must be sorted by source
    position so one forward and one reversed sweep settle reachability.
    """
    dropped = np.asarray(dropped, dtype=bool)
    M = dropped.shape[0]
    alive = ~dropped
    fwd = np.zeros((M, kinds.shape[0]), dtype=bool)
    bwd = np.zeros_like(fwd)
    fwd[:, kinds == 0] = True
    bwd[:, kinds == 2] = True
    for e in range(len(es)):
        fwd[:, ed[e]] |= fwd[:, es[e]] & alive[:, e]
    for e in range(len(es) - 1, -1, -1):
        bwd[:, es[e]] |= bwd[:, ed[e]] & alive[:, e]
    live = fwd & bwd
    return (np.sum(kinds == 1) - live[:, kinds == 1].sum(axis=1)).astype(np.int64)


def _histogram(count, E, n_hidden, chunk):
    H = np.zeros((E + 1, n_hidden + 1), dtype=np.int64)
    total = 1 << E
    bits = (1 << np.arange(E, dtype=np.int64))
    for start in range(0, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.int64)
        dropped = (masks[:, None] & bits[None, :]) != 0
        k = count(dropped)
        m = dropped.sum(axis=1)
        np.add.at(H, (m, k), 1)
    return H


def exact_histogram(n_hidden, ea, eb, chunk=1 << 15):
    """Counts H[m, k] of edge subsets with m dropped edges leaving k hidden
    nodes detached in the quotient graph, over all 2**E subsets."""
    return _histogram(lambda d: disconnected_counts(n_hidden, ea, eb, d),
                      len(ea), n_hidden, chunk)


def exact_histogram_dead(kinds, es, ed, chunk=1 << 15):
    """As :func:`exact_histogram` but counting nodes off every live path."""
    return _histogram(lambda d: dead_counts(kinds, es, ed, d),
                      len(es), int(np.sum(kinds == 1)), chunk)
