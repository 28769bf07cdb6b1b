"""Pure-Python/numpy implementations of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``EDCPATROL_PURE=1`` is set.
"""

import math

import numpy as np


def _next_at_or_after(x, offset, tau):
    # smallest k*tau + offset >= x
    t = math.ceil((x - offset) / tau) * tau + offset
    if t < x:
        t += tau
    elif t - tau >= x:
        t -= tau
    return t


def visit_outcomes(vertex, t_s, t_f, offsets, tau, T, slack):
    """Earliest detection and confirmation visit for every event.

    Parameters
    ----------
    vertex : int64 array (n,)
        Row of ``offsets`` for each event.
    t_s, t_f : float64 arrays (n,)
        Arrival and departure times. The event is observable on ``[t_s, t_f]``.
    offsets : float64 array (V, m)
        Visit phase of each robot at each vertex, in ``[0, tau)``.
    tau : float
        Common period.
    T : float
        Critical time.
    slack : float
        Clock tolerance subtracted from ``T`` when comparing elapsed times.

    Returns
    -------
    t_det, t_conf : float64 arrays, NaN when the event is never seen.
    confirmed : bool array
    """
    vertex = np.asarray(vertex, dtype=np.int64)
    t_s = np.asarray(t_s, dtype=np.float64)
    t_f = np.asarray(t_f, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    n = vertex.shape[0]
    t_det = np.full(n, np.nan)
    t_conf = np.full(n, np.nan)
    confirmed = np.zeros(n, dtype=bool)
    if n == 0:
        return t_det, t_conf, confirmed
    o = offsets[vertex]  # (n, m)
    need = T - slack

    k = np.ceil((t_s[:, None] - o) / tau)
    cand = k * tau + o
    cand = np.where(cand < t_s[:, None], cand + tau, cand)
    cand = np.where(cand - tau >= t_s[:, None], cand - tau, cand)
    jd = np.argmin(cand, axis=1)
    rows = np.arange(n)
    det = cand[rows, jd]
    seen = det <= t_f

    base = o - o[rows, jd][:, None]  # in (-tau, tau)
    dk = np.ceil((need - base) / tau)
    el = dk * tau + base
    el = np.where(el < need, el + tau, el)
    el = np.where(el - tau >= need, el - tau, el)
    conf = det + el.min(axis=1)

    t_det[seen] = det[seen]
    t_conf[seen] = conf[seen]
    confirmed[seen] = conf[seen] <= t_f[seen]
    return t_det, t_conf, confirmed


def held_karp(dist):
    """Exact shortest Hamiltonian cycle by subset DP; returns (length, order from 0)."""
    d = [list(map(float, row)) for row in np.asarray(dist, dtype=np.float64)]
    n = len(d)
    if n == 1:
        return 0.0, [0]
    if n == 2:
        return d[0][1] + d[1][0], [0, 1]
    # subsets over vertices 1..n-1; bit i-1 stands for vertex i
    m = n - 1
    full = 1 << m
    inf = math.inf
    cost = [[inf] * m for _ in range(full)]
    parent = [[-1] * m for _ in range(full)]
    for i in range(m):
        cost[1 << i][i] = d[0][i + 1]
    for mask in range(1, full):
        row = cost[mask]
        for last in range(m):
            c = row[last]
            if c == inf or not (mask >> last) & 1:
                continue
            dl = d[last + 1]
            for nxt in range(m):
                if (mask >> nxt) & 1:
                    continue
                nm = mask | (1 << nxt)
                val = c + dl[nxt + 1]
                if val < cost[nm][nxt]:
                    cost[nm][nxt] = val
                    parent[nm][nxt] = last
    last_row = cost[full - 1]
    best, best_last = inf, -1
    for last in range(m):
        val = last_row[last] + d[last + 1][0]
        if val < best:
            best, best_last = val, last
    order = []
    mask, cur = full - 1, best_last
    while cur != -1:
        order.append(cur + 1)
        prev = parent[mask][cur]
        mask ^= 1 << cur
        cur = prev
    order.append(0)
    order.reverse()
    return best, order
