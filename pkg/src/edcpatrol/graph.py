"""Patrol graphs, metric closure and TSP tours."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from edcpatrol.errors import DisconnectedGraphError, SizeCapError, ValidationError
from edcpatrol.kernels import held_karp

EXACT_TSP_CAP = 13
REL_TOL = 1e-9

Vertex = Hashable


@dataclass(frozen=True)
class PatrolGraph:
    """Weighted undirected graph together with its metric closure.

    ``dist[i, j]`` is the shortest-path distance between ``vertices[i]`` and
    ``vertices[j]``. The array is read-only.
    """

    vertices: tuple
    edges: tuple
    dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})

    def __len__(self) -> int:
        return len(self.vertices)

    def index(self, v: Vertex) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise ValidationError(f"unknown vertex {v!r}") from None

    def __contains__(self, v) -> bool:
        return v in self._index

    def distance(self, u: Vertex, v: Vertex) -> float:
        return float(self.dist[self.index(u), self.index(v)])


def metric_closure(vertices: Iterable[Vertex], edges: Iterable[Sequence]) -> PatrolGraph:
    """Build a :class:`PatrolGraph` from vertex ids and ``(u, v, weight)`` triples.

    Parallel edges keep the lightest weight. Raises :class:`ValidationError`
    for unknown endpoints or non-positive weights and
    :class:`DisconnectedGraphError` when some pair is unreachable.
    """
    vertices = tuple(vertices)
    if not vertices:
        raise ValidationError("graph has no vertices")
    if len(set(vertices)) != len(vertices):
        raise ValidationError("duplicate vertex ids")
    index = {v: i for i, v in enumerate(vertices)}
    n = len(vertices)
    w = np.full((n, n), np.inf)
    clean = []
    for e in edges:
        if len(e) != 3:
            raise ValidationError(f"edge must be (u, v, weight), got {e!r}")
        u, v, weight = e
        if u not in index or v not in index:
            raise ValidationError(f"edge {e!r} references an unknown vertex")
        weight = float(weight)
        if not weight > 0 or not math.isfinite(weight):
            raise ValidationError(f"edge {e!r} has non-positive weight")
        if u == v:
            raise ValidationError(f"self-loop at {u!r}")
        i, j = index[u], index[v]
        w[i, j] = w[j, i] = min(w[i, j], weight)
        clean.append((u, v, weight))

    rows, cols = np.nonzero(np.isfinite(w))
    adj = csr_matrix((w[rows, cols], (rows, cols)), shape=(n, n))
    dist = shortest_path(adj, method="D", directed=False)
    bad = np.argwhere(~np.isfinite(dist))
    if bad.size:
        i, j = bad[0]
        raise DisconnectedGraphError(vertices[i], vertices[j])
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    dist.setflags(write=False)
    return PatrolGraph(vertices, tuple(clean), dist)


@dataclass(frozen=True)
class Tour:
    """Closed walk visiting each vertex of ``order`` once.

    ``phases[i]`` is the distance travelled from ``order[0]`` to ``order[i]``.
    """

    order: tuple
    length: float
    phases: tuple

    def phase_of(self, v: Vertex) -> float:
        return self.phases[self.order.index(v)]


def tour_from_order(g: PatrolGraph, order: Sequence[Vertex]) -> Tour:
    order = tuple(order)
    if not order:
        raise ValidationError("empty tour")
    if len(set(order)) != len(order):
        raise ValidationError("tour repeats a vertex")
    idx = [g.index(v) for v in order]
    phases = [0.0]
    for a, b in zip(idx, idx[1:]):
        phases.append(phases[-1] + float(g.dist[a, b]))
    length = phases[-1] + (float(g.dist[idx[-1], idx[0]]) if len(idx) > 1 else 0.0)
    return Tour(order, length, tuple(phases))


def tour_length(dist: np.ndarray, order: Sequence[int]) -> float:
    return float(sum(dist[order[i - 1], order[i]] for i in range(len(order)))) if len(order) > 1 else 0.0


def nearest_neighbor(dist: np.ndarray, start: int = 0) -> list[int]:
    n = dist.shape[0]
    order = [start]
    left = set(range(n)) - {start}
    while left:
        cur = order[-1]
        # min over (distance, index): ties go to the lowest index
        nxt = min(left, key=lambda j: (dist[cur, j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def two_opt(dist: np.ndarray, order: Sequence[int]) -> list[int]:
    """Improve ``order`` with 2-opt segment reversals until no move gains."""
    order = list(order)
    n = len(order)
    if n < 4:
        return order
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            a, b = order[i], order[i + 1]
            for j in range(i + 2, n if i > 0 else n - 1):
                c, d = order[j], order[(j + 1) % n]
                old = dist[a, b] + dist[c, d]
                gain = old - (dist[a, c] + dist[b, d])
                if gain > REL_TOL * old:
                    order[i + 1 : j + 1] = reversed(order[i + 1 : j + 1])
                    a, b = order[i], order[i + 1]
                    improved = True
    return order


def tsp_tour(g: PatrolGraph, mode: str = "exact") -> Tour:
    """Shortest (``exact``) or 2-opt-optimal (``heuristic``) cycle over all vertices.

    Exact mode runs subset dynamic programming and is capped at
    ``EXACT_TSP_CAP`` vertices. The returned order starts at ``g.vertices[0]``.
    """
    n = len(g)
    if mode == "exact":
        if n > EXACT_TSP_CAP:
            raise SizeCapError("exact TSP", n, EXACT_TSP_CAP)
        _, order = held_karp(g.dist)
    elif mode == "heuristic":
        order = two_opt(g.dist, nearest_neighbor(g.dist, 0))
    else:
        raise ValidationError(f"unknown TSP mode {mode!r}")
    return tour_from_order(g, [g.vertices[i] for i in order])


def tour_period(t: Tour, speed: float) -> float:
    """Time to complete one cycle of ``t`` at ``speed``."""
    if not speed > 0:
        raise ValidationError(f"speed must be positive, got {speed!r}")
    return t.length / speed


def visit_phases(t: Tour, speed: float) -> dict:
    """Per-vertex visit offset in time units, relative to the start of ``t``."""
    if not speed > 0:
        raise ValidationError(f"speed must be positive, got {speed!r}")
    return {v: p / speed for v, p in zip(t.order, t.phases)}
