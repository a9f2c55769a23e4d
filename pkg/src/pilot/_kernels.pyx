# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels: closeness, betweenness, pagerank, distance stats.

Contract mirrors pilot._kernels_py: CSR adjacency as int64 indptr/indices,
float64 results.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"


def closeness(Py_ssize_t n, cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    if n <= 1:
        return out
    cdef cnp.int64_t[::1] dist = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t v, i, j, u, w, head, tail
    cdef cnp.int64_t du, total, count
    for v in range(n):
        for i in range(n):
            dist[i] = -1
        dist[v] = 0
        queue[0] = v
        head = 0
        tail = 1
        total = 0
        count = 0
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = du
                    total += du
                    count += 1
                    queue[tail] = w
                    tail += 1
        if total > 0:
            out[v] = (<double>count / <double>total) * (<double>count / <double>(n - 1))
    return out


def betweenness(Py_ssize_t n, cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                bint normalized=True):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bc = np.zeros(n, dtype=np.float64)
    if n == 0:
        return bc
    cdef Py_ssize_t nnz = indices.shape[0]
    cdef cnp.float64_t[::1] sigma = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] delta = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] dist = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] order = np.empty(n, dtype=np.int64)
    # Flat predecessor storage: node w gets a window sized by its in-degree,
    # enough for one entry per in-edge per source.
    cdef cnp.int64_t[::1] pred = np.empty(max(nnz, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] pred_start = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] pred_count = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t s, i, j, u, w, k, head, tail
    cdef cnp.int64_t du
    cdef double coeff
    for j in range(nnz):
        pred_start[indices[j] + 1] += 1
    for i in range(n):
        pred_start[i + 1] += pred_start[i]
    for s in range(n):
        for i in range(n):
            sigma[i] = 0.0
            delta[i] = 0.0
            dist[i] = -1
            pred_count[i] = 0
        sigma[s] = 1.0
        dist[s] = 0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = order[head]
            head += 1
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = du
                    order[tail] = w
                    tail += 1
                if dist[w] == du:
                    sigma[w] += sigma[u]
                    pred[pred_start[w] + pred_count[w]] = u
                    pred_count[w] += 1
        for i in range(tail - 1, -1, -1):
            w = order[i]
            coeff = (1.0 + delta[w]) / sigma[w]
            for k in range(pred_count[w]):
                u = pred[pred_start[w] + k]
                delta[u] += sigma[u] * coeff
            if w != s:
                bc[w] += delta[w]
    if normalized and n > 2:
        for i in range(n):
            bc[i] /= <double>((n - 1) * (n - 2))
    return bc


def pagerank(Py_ssize_t n, cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
             double alpha, double tol, int max_iter):
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    cdef cnp.float64_t[::1] x = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] new = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] tmp
    cdef Py_ssize_t i, u, j, it
    cdef double base = (1.0 - alpha) / n
    cdef double dangling, share, err
    cdef cnp.int64_t deg
    for i in range(n):
        x[i] = 1.0 / n
    for it in range(max_iter):
        dangling = 0.0
        for i in range(n):
            new[i] = base
        for u in range(n):
            deg = indptr[u + 1] - indptr[u]
            if deg == 0:
                dangling += x[u]
                continue
            share = alpha * x[u] / <double>deg
            for j in range(indptr[u], indptr[u + 1]):
                new[indices[j]] += share
        share = alpha * dangling / n
        err = 0.0
        for i in range(n):
            new[i] += share
            err += fabs(new[i] - x[i])
        tmp = x
        x = new
        new = tmp
        if err < n * tol:
            break
    cdef cnp.ndarray[cnp.float64_t, ndim=1] result = np.empty(n, dtype=np.float64)
    for i in range(n):
        result[i] = x[i]
    return result


def distance_stats(Py_ssize_t n, cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                   cnp.int64_t[::1] members):
    cdef Py_ssize_t m = members.shape[0]
    if m < 2:
        return 0, 0.0
    cdef cnp.int64_t[::1] dist = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(n, dtype=np.int64)
    cdef cnp.uint8_t[::1] mask = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t si, i, j, u, w, head, tail
    cdef cnp.int64_t s, du, d, diameter = 0, total = 0
    for si in range(m):
        mask[members[si]] = 1
    for si in range(m):
        s = members[si]
        for i in range(n):
            dist[i] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = du
                    queue[tail] = w
                    tail += 1
        for i in range(n):
            if mask[i]:
                d = dist[i]
                if d > 0:
                    total += d
                    if d > diameter:
                        diameter = d
    return int(diameter), <double>total / <double>(m * (m - 1))
