# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, INFINITY

cnp.import_array()


cdef inline double _next_at_or_after(double x, double offset, double tau) nogil:
    cdef double t = ceil((x - offset) / tau) * tau + offset
    if t < x:
        t += tau
    elif t - tau >= x:
        t -= tau
    return t


def visit_outcomes(vertex, t_s, t_f, offsets, double tau, double T, double slack):
    cdef const cnp.int64_t[::1] v = np.ascontiguousarray(vertex, dtype=np.int64)
    cdef const double[::1] ts = np.ascontiguousarray(t_s, dtype=np.float64)
    cdef const double[::1] tf = np.ascontiguousarray(t_f, dtype=np.float64)
    cdef const double[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t m = off.shape[1]
    out_det = np.full(n, np.nan)
    out_conf = np.full(n, np.nan)
    out_ok = np.zeros(n, dtype=np.uint8)
    cdef double[::1] det_v = out_det
    cdef double[::1] conf_v = out_conf
    cdef cnp.uint8_t[::1] ok_v = out_ok
    cdef double need = T - slack
    cdef Py_ssize_t i, j, jd, row
    cdef double best, t, od, base, el, best_el
    with nogil:
        for i in range(n):
            row = v[i]
            best = INFINITY
            jd = 0
            for j in range(m):
                t = _next_at_or_after(ts[i], off[row, j], tau)
                if t < best:
                    best = t
                    jd = j
            if best > tf[i]:
                continue
            od = off[row, jd]
            best_el = INFINITY
            for j in range(m):
                base = off[row, j] - od
                el = _next_at_or_after(need, base, tau)
                if el < best_el:
                    best_el = el
            det_v[i] = best
            conf_v[i] = best + best_el
            ok_v[i] = conf_v[i] <= tf[i]
    return out_det, out_conf, out_ok.astype(bool)


def held_karp(dist):
    cdef const double[:, ::1] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    if n == 1:
        return 0.0, [0]
    if n == 2:
        return d[0, 1] + d[1, 0], [0, 1]
    cdef Py_ssize_t m = n - 1
    cdef Py_ssize_t full = 1 << m
    cost_arr = np.full((full, m), np.inf)
    parent_arr = np.full((full, m), -1, dtype=np.int64)
    cdef double[:, ::1] cost = cost_arr
    cdef cnp.int64_t[:, ::1] parent = parent_arr
    cdef Py_ssize_t mask, last, nxt, nm, i
    cdef double c, val
    with nogil:
        for i in range(m):
            cost[1 << i, i] = d[0, i + 1]
        for mask in range(1, full):
            for last in range(m):
                c = cost[mask, last]
                if c == INFINITY or not ((mask >> last) & 1):
                    continue
                for nxt in range(m):
                    if (mask >> nxt) & 1:
                        continue
                    nm = mask | (1 << nxt)
                    val = c + d[last + 1, nxt + 1]
                    if val < cost[nm, nxt]:
                        cost[nm, nxt] = val
                        parent[nm, nxt] = last
    cdef double best = INFINITY
    cdef Py_ssize_t best_last = -1
    for last in range(m):
        val = cost[full - 1, last] + d[last + 1, 0]
        if val < best:
            best = val
            best_last = last
    order = []
    mask = full - 1
    cdef Py_ssize_t cur = best_last, prev
    while cur != -1:
        order.append(int(cur + 1))
        prev = parent[mask, cur]
        mask ^= 1 << cur
        cur = prev
    order.append(0)
    order.reverse()
    return float(best), order
