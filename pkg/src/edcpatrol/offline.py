"""Offline detection/confirmation: all events known in advance.

A true event ``(v, t_s, t_f)`` must be visited once in its detection window
``[t_s, t_f - T]`` and again in ``[t_det + T, t_f]``. Deciding whether one
robot can serve every true event is NP-complete (TSPTW reduces to it), so the
solvers here are exact searches for small instances.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional

import numpy as np

from edcpatrol.errors import SizeCapError, ValidationError
from edcpatrol.graph import PatrolGraph
from edcpatrol.sim import Event

EVENT_CAP = 12
TSPTW_CAP = 10
EPS = 1e-9


@dataclass(frozen=True)
class OfflineInstance:
    graph: PatrolGraph
    T: float
    events: tuple
    speed: float = 1.0
    start_vertex: object = None  # None: robot may start anywhere

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.T > 0:
            raise ValidationError(f"T must be positive, got {self.T!r}")
        if not self.speed > 0:
            raise ValidationError(f"speed must be positive, got {self.speed!r}")
        if self.start_vertex is not None and self.start_vertex not in self.graph:
            raise ValidationError(f"start vertex {self.start_vertex!r} is not in the graph")
        ids = set()
        by_vertex: dict = {}
        for e in self.events:
            if e.vertex not in self.graph:
                raise ValidationError(f"event {e.id} is at unknown vertex {e.vertex!r}")
            if e.id in ids:
                raise ValidationError(f"duplicate event id {e.id}")
            ids.add(e.id)
            by_vertex.setdefault(e.vertex, []).append(e)
        for v, evs in by_vertex.items():
            evs.sort(key=lambda e: e.t_s)
            for a, b in zip(evs, evs[1:]):
                if b.t_s <= a.t_f:
                    raise ValidationError(f"events {a.id} and {b.id} overlap at vertex {v!r}")

    @property
    def start_time(self) -> float:
        return min((e.t_s for e in self.events), default=0.0)

    def true_events(self) -> list:
        return [e for e in self.events if e.is_true(self.T)]


@dataclass(frozen=True)
class TsptwInstance:
    graph: PatrolGraph
    windows: Mapping

    def __post_init__(self):
        missing = [v for v in self.graph.vertices if v not in self.windows]
        if missing:
            raise ValidationError(f"no time window for vertices {missing!r}")
        for v, (e, l) in self.windows.items():
            if v not in self.graph:
                raise ValidationError(f"window given for unknown vertex {v!r}")
            if e > l:
                raise ValidationError(f"window of {v!r} has e > l")


@dataclass(frozen=True)
class Visit:
    time: float
    vertex: object
    action: str  # "detect" | "confirm" | "transit"
    event: Optional[int] = None


@dataclass(frozen=True)
class Schedule:
    visits: tuple

    def records(self) -> list:
        return [(v.time, v.vertex, v.action if v.event is None else f"{v.action}({v.event})") for v in self.visits]


def windows(e: Event, T: float, t_det: Optional[float] = None):
    """Detection and confirmation windows of ``e``.

    Returns ``(None, None)`` for a false event. The confirmation window is
    ``None`` unless ``t_det`` is given.
    """
    if e.t_f - e.t_s < T:
        if t_det is not None:
            raise ValidationError(f"event {e.id} is false and has no detection window")
        return None, None
    det = (e.t_s, e.t_f - T)
    if t_det is None:
        return det, None
    if not det[0] - EPS <= t_det <= det[1] + EPS:
        raise ValidationError(f"t_det={t_det} outside detection window {det}")
    return det, (t_det + T, e.t_f)


class _Search:
    def __init__(self, inst: OfflineInstance, prune: bool):
        evs = inst.true_events()
        if len(evs) > EVENT_CAP:
            raise SizeCapError("offline EDC true-event", len(evs), EVENT_CAP)
        self.evs = evs
        self.prune = prune
        self.T = inst.T
        self.loc = [inst.graph.index(e.vertex) for e in evs]
        self.travel = (np.asarray(inst.graph.dist) / inst.speed).tolist()
        self.start = None if inst.start_vertex is None else inst.graph.index(inst.start_vertex)
        self.t0 = inst.start_time
        self.memo: dict = {}
        self.path: list = []

    def _move(self, here, i):
        return 0.0 if here is None else self.travel[here][self.loc[i]]

    def run(self):
        k = len(self.evs)
        return self._dfs(self.start, self.t0, [None] * k, 0, 0)

    def _dominated(self, here, now, det, dmask, cmask):
        key = (here, dmask, cmask)
        pending = tuple(det[i] for i in range(len(det)) if dmask >> i & 1 and not cmask >> i & 1)
        seen = self.memo.setdefault(key, [])
        for t, p in seen:
            if t <= now and all(x <= y for x, y in zip(p, pending)):
                return True
        seen.append((now, pending))
        return False

    def _dfs(self, here, now, det, dmask, cmask):
        k = len(self.evs)
        if cmask == (1 << k) - 1:
            return True
        T, evs = self.T, self.evs
        moves = []
        for i in range(k):
            if cmask >> i & 1:
                continue
            arrive = now + self._move(here, i)
            if dmask >> i & 1:
                deadline = evs[i].t_f
                t = max(arrive, det[i] + T)
            else:
                deadline = evs[i].t_f - T
                t = max(arrive, evs[i].t_s)
            if t > deadline + EPS:
                if self.prune:
                    return False  # unreachable even by a direct move
                continue
            moves.append((deadline, i, t))
        if self.prune and self._dominated(here, now, det, dmask, cmask):
            return False
        moves.sort()
        for _, i, t in moves:
            if dmask >> i & 1:
                self.path.append(Visit(t, evs[i].vertex, "confirm", evs[i].id))
                ok = self._dfs(self.loc[i], t, det, dmask, cmask | 1 << i)
            else:
                det[i] = t
                self.path.append(Visit(t, evs[i].vertex, "detect", evs[i].id))
                ok = self._dfs(self.loc[i], t, det, dmask | 1 << i, cmask)
                det[i] = None
            if ok:
                return True
            self.path.pop()
        return False


def offline_feasible(inst: OfflineInstance, *, prune: bool = True) -> Optional[Schedule]:
    """Find a schedule serving every true event, or return ``None``.

    Depth-first search over orderings of detect/confirm actions, each taken
    at its earliest possible time. With ``prune`` the search also cuts states
    where some outstanding deadline is out of reach and states dominated by
    an already-failed one (same position and progress, no earlier clock or
    detection stamps). Raises :class:`SizeCapError` above ``EVENT_CAP``
    true events.
    """
    s = _Search(inst, prune)
    return Schedule(tuple(s.path)) if s.run() else None


def validate_schedule(inst: OfflineInstance, schedule: Schedule) -> list:
    """Re-check a schedule from scratch; returns a list of violations (empty if valid)."""
    problems = []
    g, T = inst.graph, inst.T
    events = {e.id: e for e in inst.events}
    det_at: dict = {}
    conf_at: dict = {}
    prev_v, prev_t = inst.start_vertex, inst.start_time
    for n, v in enumerate(schedule.visits):
        if v.vertex not in g:
            problems.append(f"visit {n}: unknown vertex {v.vertex!r}")
            continue
        if prev_v is not None:
            need = g.distance(prev_v, v.vertex) / inst.speed
            if v.time - prev_t < need - EPS:
                problems.append(f"visit {n}: reached {v.vertex!r} at {v.time} but travel needs {need}")
        elif v.time < prev_t - EPS:
            problems.append(f"visit {n}: before start time {prev_t}")
        prev_v, prev_t = v.vertex, v.time
        if v.action == "transit":
            continue
        e = events.get(v.event)
        if e is None or e.vertex != v.vertex:
            problems.append(f"visit {n}: event {v.event!r} is not at {v.vertex!r}")
            continue
        if v.action == "detect":
            if v.event in det_at:
                problems.append(f"event {v.event}: detected twice")
            det_at[v.event] = v.time
            if not (e.t_s - EPS <= v.time <= e.t_f - T + EPS):
                problems.append(f"event {v.event}: detection at {v.time} outside [{e.t_s}, {e.t_f - T}]")
        elif v.action == "confirm":
            if v.event not in det_at:
                problems.append(f"event {v.event}: confirmed before detection")
                continue
            conf_at[v.event] = v.time
            if not (det_at[v.event] + T - EPS <= v.time <= e.t_f + EPS):
                problems.append(f"event {v.event}: confirmation at {v.time} outside [{det_at[v.event] + T}, {e.t_f}]")
        else:
            problems.append(f"visit {n}: unknown action {v.action!r}")
    for e in inst.events:
        if e.t_f - e.t_s >= T and e.id not in conf_at:
            problems.append(f"event {e.id}: true but never confirmed")
    return problems


def tsptw_feasible(t: TsptwInstance) -> tuple:
    """Open path through every vertex inside its window, starting at ``min e``.

    Returns ``(True, order)`` or ``(False, None)``. Raises
    :class:`SizeCapError` above ``TSPTW_CAP`` vertices.
    """
    g = t.graph
    n = len(g)
    if n > TSPTW_CAP:
        raise SizeCapError("TSPTW", n, TSPTW_CAP)
    e = [t.windows[v][0] for v in g.vertices]
    l = [t.windows[v][1] for v in g.vertices]
    d = g.dist.tolist()
    order: list = []

    def extend(here, now, left):
        if not left:
            return True
        for j in sorted(left):
            arrive = max(now + (0.0 if here is None else d[here][j]), e[j])
            if arrive > l[j] + EPS:
                continue
            order.append(j)
            if extend(j, arrive, left - {j}):
                return True
            order.pop()
        return False

    if extend(None, min(e), frozenset(range(n))):
        return True, [g.vertices[j] for j in order]
    return False, None


def reduce_tsptw(t: TsptwInstance) -> OfflineInstance:
    """Offline instance that is feasible exactly when ``t`` is.

    ``T`` is the sum of all pairwise distances plus the window span, and each
    vertex gets one event ``(e_i, l_i + T)`` so that its detection window is
    ``[e_i, l_i]``. A zero ``T`` (one vertex, point window) is replaced by 1.
    """
    g = t.graph
    span = max(w[1] for w in t.windows.values()) - min(w[0] for w in t.windows.values())
    T = float(np.sum(g.dist)) + span
    if T == 0:
        T = 1.0
    events = [Event(i, v, float(t.windows[v][0]), float(t.windows[v][1]) + T) for i, v in enumerate(g.vertices)]
    return OfflineInstance(g, T, tuple(events), speed=1.0, start_vertex=None)
