# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same signatures and conventions as ``_kernels_py``.

Per-sample loops accumulate gradients in sample order, so the result does
not depend on how the batch was produced.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, fabs

cnp.import_array()


def forward_batch(const long[::1] indptr, const long[::1] in_src,
                  const long[::1] in_edge, const long[::1] kinds,
                  const long[::1] input_pos, const double[::1] theta,
                  const double[:, ::1] X, double gamma):
    cdef Py_ssize_t N = X.shape[0], n = kinds.shape[0]
    cdef Py_ssize_t s, p, k, i
    cdef double z
    A_arr = np.zeros((N, n))
    Z_arr = np.zeros((N, n))
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] Z = Z_arr
    for s in range(N):
        for i in range(input_pos.shape[0]):
            A[s, input_pos[i]] = X[s, i]
        for p in range(n):
            if kinds[p] == 0:
                continue
            z = 0.0
            for k in range(indptr[p], indptr[p + 1]):
                z += theta[in_edge[k]] * A[s, in_src[k]]
            Z[s, p] = z
            if kinds[p] == 1 and z <= 0:
                A[s, p] = gamma * z
            else:
                A[s, p] = z
    return A_arr, Z_arr


def loss_grad(const long[::1] indptr, const long[::1] in_src,
              const long[::1] in_edge, const long[::1] kinds,
              const long[::1] input_pos, const long[::1] output_pos,
              const double[::1] theta, const double[:, ::1] X,
              const double[:, ::1] Y, int loss_kind, double gamma):
    cdef Py_ssize_t N = X.shape[0], n = kinds.shape[0]
    cdef Py_ssize_t n_out = output_pos.shape[0]
    cdef Py_ssize_t s, p, k, i, q
    cdef double z, yh, y, dz, loss = 0.0, inv_n = 1.0 / N
    a_arr = np.zeros(n)
    zz_arr = np.zeros(n)
    da_arr = np.zeros(n)
    g_arr = np.zeros(theta.shape[0])
    cdef double[::1] a = a_arr
    cdef double[::1] zz = zz_arr
    cdef double[::1] da = da_arr
    cdef double[::1] g = g_arr
    for s in range(N):
        for p in range(n):
            a[p] = 0.0
            da[p] = 0.0
        for i in range(input_pos.shape[0]):
            a[input_pos[i]] = X[s, i]
        for p in range(n):
            if kinds[p] == 0:
                continue
            z = 0.0
            for k in range(indptr[p], indptr[p + 1]):
                z += theta[in_edge[k]] * a[in_src[k]]
            zz[p] = z
            if kinds[p] == 1 and z <= 0:
                a[p] = gamma * z
            else:
                a[p] = z
        for i in range(n_out):
            q = output_pos[i]
            yh = a[q]
            y = Y[s, i]
            if loss_kind == 0:
                loss += 0.5 * (yh - y) * (yh - y)
                da[q] = (yh - y) * inv_n
            else:
                # softplus(yh) - y*yh, evaluated stably
                loss += (yh if yh > 0 else 0.0) + log1p(exp(-fabs(yh))) - y * yh
                if yh >= 0:
                    da[q] = (1.0 / (1.0 + exp(-yh)) - y) * inv_n
                else:
                    da[q] = (exp(yh) / (1.0 + exp(yh)) - y) * inv_n
        for p in range(n - 1, -1, -1):
            if kinds[p] == 0:
                continue
            dz = da[p]
            if kinds[p] == 1 and zz[p] <= 0:
                dz = dz * gamma
            for k in range(indptr[p], indptr[p + 1]):
                g[in_edge[k]] += dz * a[in_src[k]]
                da[in_src[k]] += dz * theta[in_edge[k]]
    return loss * inv_n, g_arr


cdef inline long _find(long* parent, long x) nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef long _count_one(long n_hidden, const long[::1] ea, const long[::1] eb,
                     unsigned long long mask, long* parent) nogil:
    cdef long i, ra, rb, root, cnt = 0
    cdef Py_ssize_t e
    for i in range(n_hidden + 1):
        parent[i] = i
    for e in range(ea.shape[0]):
        if (mask >> e) & 1ULL:
            continue
        ra = _find(parent, ea[e])
        rb = _find(parent, eb[e])
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    root = _find(parent, 0)
    for i in range(1, n_hidden + 1):
        if _find(parent, i) != root:
            cnt += 1
    return cnt


def disconnected_counts(long n_hidden, const long[::1] ea, const long[::1] eb,
                        dropped):
    cdef cnp.uint8_t[:, ::1] d = np.ascontiguousarray(dropped, dtype=np.uint8)
    cdef Py_ssize_t M = d.shape[0], E = d.shape[1], r, e
    cdef unsigned long long mask
    out_arr = np.zeros(M, dtype=np.int64)
    cdef long long[::1] out = out_arr
    parent_arr = np.zeros(n_hidden + 1, dtype=np.int64)
    cdef long[::1] parent = parent_arr
    if E > 64:
        raise ValueError("at most 64 edges supported")
    for r in range(M):
        mask = 0
        for e in range(E):
            if d[r, e]:
                mask |= (1ULL << e)
        out[r] = _count_one(n_hidden, ea, eb, mask, &parent[0])
    return out_arr


def exact_histogram(long n_hidden, const long[::1] ea, const long[::1] eb):
    cdef Py_ssize_t E = ea.shape[0]
    if E > 62:
        raise ValueError("too many edges for exhaustive enumeration")
    H_arr = np.zeros((E + 1, n_hidden + 1), dtype=np.int64)
    cdef long long[:, ::1] H = H_arr
    parent_arr = np.zeros(n_hidden + 1, dtype=np.int64)
    cdef long[::1] parent = parent_arr
    cdef unsigned long long mask, total = 1ULL << E
    cdef long k
    cdef int m
    with nogil:
        mask = 0
        while mask < total:
            k = _count_one(n_hidden, ea, eb, mask, &parent[0])
            m = __builtin_popcountll(mask)
            H[m, k] += 1
            mask += 1
    return H_arr


cdef long _dead_one(const long[::1] kinds, const long[::1] es, const long[::1] ed,
                    unsigned long long mask, char* fwd, char* bwd) nogil:
    cdef Py_ssize_t n = kinds.shape[0], E = es.shape[0], p, e
    cdef long cnt = 0
    for p in range(n):
        fwd[p] = kinds[p] == 0
        bwd[p] = kinds[p] == 2
    for e in range(E):
        if not ((mask >> e) & 1ULL) and fwd[es[e]]:
            fwd[ed[e]] = 1
    for e in range(E - 1, -1, -1):
        if not ((mask >> e) & 1ULL) and bwd[ed[e]]:
            bwd[es[e]] = 1
    for p in range(n):
        if kinds[p] == 1 and not (fwd[p] and bwd[p]):
            cnt += 1
    return cnt


def dead_counts(const long[::1] kinds, const long[::1] es, const long[::1] ed, dropped):
    cdef cnp.uint8_t[:, ::1] d = np.ascontiguousarray(dropped, dtype=np.uint8)
    cdef Py_ssize_t M = d.shape[0], E = d.shape[1], r, e
    cdef unsigned long long mask
    if E > 64:
        raise ValueError("at most 64 edges supported")
    out_arr = np.zeros(M, dtype=np.int64)
    cdef long long[::1] out = out_arr
    buf_arr = np.zeros(2 * kinds.shape[0] + 2, dtype=np.int8)
    cdef char[::1] buf = buf_arr
    cdef char* fwd = &buf[0]
    cdef char* bwd = &buf[kinds.shape[0] + 1]
    for r in range(M):
        mask = 0
        for e in range(E):
            if d[r, e]:
                mask |= (1ULL << e)
        out[r] = _dead_one(kinds, es, ed, mask, fwd, bwd)
    return out_arr


def exact_histogram_dead(const long[::1] kinds, const long[::1] es, const long[::1] ed):
    cdef Py_ssize_t E = es.shape[0], p
    cdef long n_hidden = 0
    for p in range(kinds.shape[0]):
        if kinds[p] == 1:
            n_hidden += 1
    if E > 62:
        raise ValueError("too many edges for exhaustive enumeration")
    H_arr = np.zeros((E + 1, n_hidden + 1), dtype=np.int64)
    cdef long long[:, ::1] H = H_arr
    buf_arr = np.zeros(2 * kinds.shape[0] + 2, dtype=np.int8)
    cdef char[::1] buf = buf_arr
    cdef char* fwd = &buf[0]
    cdef char* bwd = &buf[kinds.shape[0] + 1]
    cdef unsigned long long mask, total = 1ULL << E
    cdef long k
    with nogil:
        mask = 0
        while mask < total:
            k = _dead_one(kinds, es, ed, mask, fwd, bwd)
            H[__builtin_popcountll(mask), k] += 1
            mask += 1
    return H_arr


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
