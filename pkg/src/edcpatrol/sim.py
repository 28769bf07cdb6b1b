"""Monte Carlo simulation of events and robots patrolling a common tour.

Robots move at constant speed along one cycle and observe a vertex only at
the instant they pass it. They share one database keyed by vertex; a visit
either clears the record (vertex empty), stores a new event with the current
time stamp, or confirms a stored event once at least ``T`` has elapsed since
its time stamp. An event is observable on the closed interval ``[t_s, t_f]``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from edcpatrol.analytic import VertexParams
from edcpatrol.errors import ValidationError
from edcpatrol.graph import PatrolGraph, Tour, tour_period
from edcpatrol.kernels import visit_outcomes

# relative clock tolerance on elapsed-time comparisons
CLOCK_TOL = 1e-9
Z95 = 1.959963984540054

SeedLike = Union[int, np.random.SeedSequence, None]


@dataclass(frozen=True)
class Event:
    id: int
    vertex: object
    t_s: float
    t_f: float

    def __post_init__(self):
        if not self.t_f > self.t_s:
            raise ValidationError(f"event {self.id}: t_f must exceed t_s")

    def is_true(self, T: float) -> bool:
        return self.t_f - self.t_s >= T


class EventLog(Sequence):
    """Column-oriented list of events; indexing yields :class:`Event`."""

    def __init__(self, labels, vidx, t_s, t_f, ids=None):
        self.labels = tuple(labels)
        self.vidx = np.asarray(vidx, dtype=np.int64)
        self.t_s = np.asarray(t_s, dtype=np.float64)
        self.t_f = np.asarray(t_f, dtype=np.float64)
        self.ids = np.arange(len(self.vidx), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if not (len(self.vidx) == len(self.t_s) == len(self.t_f) == len(self.ids)):
            raise ValidationError("event columns differ in length")
        if np.any(~(self.t_f > self.t_s)):
            raise ValidationError("every event needs t_f > t_s")

    @classmethod
    def from_events(cls, events) -> "EventLog":
        if isinstance(events, EventLog):
            return events
        events = list(events)
        labels = list(dict.fromkeys(e.vertex for e in events))
        pos = {v: i for i, v in enumerate(labels)}
        return cls(
            labels,
            [pos[e.vertex] for e in events],
            [e.t_s for e in events],
            [e.t_f for e in events],
            [e.id for e in events],
        )

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return Event(int(self.ids[i]), self.labels[self.vidx[i]], float(self.t_s[i]), float(self.t_f[i]))

    @property
    def vertices(self) -> list:
        return [self.labels[k] for k in self.vidx]

    def true_mask(self, T: float) -> np.ndarray:
        return self.t_f - self.t_s >= T

    def check_disjoint(self) -> None:
        """Raise if two events at one vertex overlap in time."""
        order = np.lexsort((self.t_s, self.vidx))
        v, s, f = self.vidx[order], self.t_s[order], self.t_f[order]
        clash = (v[1:] == v[:-1]) & (s[1:] <= f[:-1])
        if np.any(clash):
            k = int(np.argmax(clash))
            raise ValidationError(
                f"events {int(self.ids[order][k])} and {int(self.ids[order][k + 1])} overlap at vertex {self.labels[v[k]]!r}"
            )


@dataclass(frozen=True)
class RobotFleet:
    """Robots sharing ``tour`` at ``speed``; robot ``j`` trails robot 0 by ``lags[j]``."""

    tour: Tour
    speed: float
    lags: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "lags", tuple(float(x) for x in self.lags))
        tau = tour_period(self.tour, self.speed)
        if not tau > 0:
            raise ValidationError("tour period must be positive (tour needs two or more vertices)")
        lags = self.lags
        if not lags or lags[0] != 0.0:
            raise ValidationError("first robot must have lag 0")
        if any(b <= a for a, b in zip(lags, lags[1:])) or lags[-1] >= tau:
            raise ValidationError(f"lags must be strictly increasing within [0, {tau})")

    @property
    def period(self) -> float:
        return tour_period(self.tour, self.speed)

    @classmethod
    def equally_spaced(cls, tour: Tour, speed: float, m: int = 1) -> "RobotFleet":
        tau = tour_period(tour, speed)
        return cls(tour, speed, tuple(j * tau / m for j in range(m)))

    @classmethod
    def from_gaps(cls, tour: Tour, speed: float, gaps) -> "RobotFleet":
        """Fleet whose successive robot gaps are ``gaps`` (the last one closes the cycle)."""
        lags = np.concatenate([[0.0], np.cumsum(gaps[:-1])]) if len(gaps) > 1 else [0.0]
        return cls(tour, speed, tuple(lags))

    def offsets(self, vertices) -> np.ndarray:
        """Visit phase of each robot at each of ``vertices``, shape (len(vertices), m)."""
        tau = self.period
        pos = {v: i for i, v in enumerate(self.tour.order)}
        rows = []
        for v in vertices:
            if v not in pos:
                raise ValidationError(f"vertex {v!r} has events but is not on the tour")
            p = self.tour.phases[pos[v]] / self.speed
            rows.append([math.fmod(p + lag, tau) for lag in self.lags])
        return np.array(rows, dtype=np.float64).reshape(len(rows), len(self.lags))


def with_replay_robots(fleet: RobotFleet, lag: float) -> RobotFleet:
    """Add one robot trailing each existing robot by ``lag`` (modulo the period)."""
    tau = fleet.period
    extra = [math.fmod(x + lag, tau) for x in fleet.lags]
    merged: list[float] = []
    for x in sorted(fleet.lags + tuple(extra)):
        if tau - x <= CLOCK_TOL * tau:
            x = 0.0
        if not merged or x - merged[-1] > CLOCK_TOL * tau:
            merged.append(x)
    return RobotFleet(fleet.tour, fleet.speed, tuple(sorted(set(merged))))


@dataclass(frozen=True)
class SimStats:
    true_events: int
    confirmed_true: int
    false_positives: int = 0
    detected_true: int = 0
    seed: Optional[int] = None

    @property
    def estimate(self) -> float:
        return self.confirmed_true / self.true_events if self.true_events else 0.0

    @property
    def ci_halfwidth(self) -> float:
        n = self.true_events
        if not n:
            return 0.0
        p = self.estimate
        return Z95 * math.sqrt(p * (1.0 - p) / n)

    @property
    def std_error(self) -> float:
        return self.ci_halfwidth / Z95

    def as_record(self) -> dict:
        return {
            "true_events": self.true_events,
            "confirmed_true": self.confirmed_true,
            "estimate": self.estimate,
            "ci_halfwidth": self.ci_halfwidth,
            "false_positives": self.false_positives,
            "detected_true": self.detected_true,
            "seed": self.seed,
        }

    @staticmethod
    def pool(stats, seed=None) -> "SimStats":
        stats = list(stats)
        return SimStats(
            true_events=sum(s.true_events for s in stats),
            confirmed_true=sum(s.confirmed_true for s in stats),
            false_positives=sum(s.false_positives for s in stats),
            detected_true=sum(s.detected_true for s in stats),
            seed=seed,
        )


@dataclass(frozen=True)
class Outcomes:
    """Per-event results aligned with an :class:`EventLog` (NaN = never seen)."""

    t_det: np.ndarray
    t_conf: np.ndarray
    confirmed: np.ndarray

    def stats(self, events: EventLog, T: float, seed=None) -> SimStats:
        true = events.true_mask(T)
        return SimStats(
            true_events=int(true.sum()),
            confirmed_true=int((self.confirmed & true).sum()),
            false_positives=int((self.confirmed & ~true).sum()),
            detected_true=int((~np.isnan(self.t_det) & true).sum()),
            seed=seed,
        )


def _vertex_substream(root: np.random.SeedSequence, i: int) -> np.random.Generator:
    child = np.random.SeedSequence(entropy=root.entropy, spawn_key=tuple(root.spawn_key) + (i,))
    return np.random.default_rng(child)


def _as_seedseq(rng: SeedLike) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    return np.random.SeedSequence(rng)


def generate_events(params: Mapping, horizon: float, rng: SeedLike = None) -> EventLog:
    """Alternating arrival/activity renewal process at every vertex.

    Each vertex waits an Exponential(``lam``) time after the previous
    departure (or after 0), then hosts one event for an Exponential(``mu``)
    time. Events still active at ``horizon`` are dropped. Vertex ``i`` of
    ``params`` draws from its own substream of ``rng``.
    """
    if not horizon > 0:
        raise ValidationError(f"horizon must be positive, got {horizon!r}")
    root = _as_seedseq(rng)
    labels = list(params)
    vcol, scol, fcol = [], [], []
    for i, v in enumerate(labels):
        p = params[v]
        if not isinstance(p, VertexParams):
            p = VertexParams(*p)
        if p.lam == 0:
            continue
        gen = _vertex_substream(root, i)
        chunk = int(horizon / (1.0 / p.lam + 1.0 / p.mu) * 1.1) + 64
        t0 = 0.0
        starts, ends = [], []
        while t0 < horizon:
            gaps = gen.exponential(1.0 / p.lam, chunk)
            durs = gen.exponential(1.0 / p.mu, chunk)
            cycle = np.cumsum(gaps + durs)
            s = t0 + cycle - durs
            f = t0 + cycle
            starts.append(s)
            ends.append(f)
            t0 = f[-1]
        s = np.concatenate(starts)
        f = np.concatenate(ends)
        keep = f <= horizon
        s, f = s[keep], f[keep]
        vcol.append(np.full(len(s), i, dtype=np.int64))
        scol.append(s)
        fcol.append(f)
    if not vcol:
        return EventLog(labels, [], [], [])
    return EventLog(labels, np.concatenate(vcol), np.concatenate(scol), np.concatenate(fcol))


def _kernel_outcomes(fleet: RobotFleet, events: EventLog, T: float) -> Outcomes:
    offsets = fleet.offsets(events.labels) if events.labels else np.zeros((0, len(fleet.lags)))
    t_det, t_conf, ok = visit_outcomes(
        events.vidx, events.t_s, events.t_f, offsets, fleet.period, T, CLOCK_TOL * T
    )
    return Outcomes(t_det, t_conf, ok)


def _stepwise_outcomes(fleet: RobotFleet, events: EventLog, T: float) -> Outcomes:
    """Visit-by-visit replay of the shared database; slow, used for checking."""
    n = len(events)
    t_det = np.full(n, np.nan)
    t_conf = np.full(n, np.nan)
    confirmed = np.zeros(n, dtype=bool)
    if n == 0:
        return Outcomes(t_det, t_conf, confirmed)
    tau = fleet.period
    end = float(events.t_f.max())
    offsets = fleet.offsets(events.labels)
    per_vertex = {}
    for k in range(len(events.labels)):
        idx = np.flatnonzero(events.vidx == k)
        per_vertex[k] = idx[np.argsort(events.t_s[idx])]
    cycles = np.arange(int(end / tau) + 2)
    vt, vk = [], []
    for k in per_vertex:
        for o in offsets[k]:
            times = o + tau * cycles
            times = times[times <= end]
            vt.append(times)
            vk.append(np.full(len(times), k))
    vt = np.concatenate(vt)
    vk = np.concatenate(vk)
    order = np.lexsort((vk, vt))
    need = T - CLOCK_TOL * T
    db: dict = {}
    ptr = dict.fromkeys(per_vertex, 0)
    for now, k in zip(vt[order].tolist(), vk[order].tolist()):
        idx = per_vertex[k]
        while ptr[k] < len(idx) and events.t_f[idx[ptr[k]]] < now:
            ptr[k] += 1
        e = idx[ptr[k]] if ptr[k] < len(idx) and events.t_s[idx[ptr[k]]] <= now else None
        if e is None:
            db.pop(k, None)
        elif k not in db or db[k][0] != e:
            db[k] = (e, now)
            t_det[e] = now
        elif np.isnan(t_conf[e]) and now - db[k][1] >= need:
            t_conf[e] = now
            confirmed[e] = True
    # confirmation visits that fall after departure never happen in the replay
    return Outcomes(t_det, t_conf, confirmed)


def patrol_outcomes(g: PatrolGraph, fleet: RobotFleet, events, T: float, method: str = "kernel") -> Outcomes:
    if not T > 0:
        raise ValidationError(f"T must be positive, got {T!r}")
    events = EventLog.from_events(events)
    events.check_disjoint()
    for v in fleet.tour.order:
        if v not in g:
            raise ValidationError(f"tour vertex {v!r} is not in the graph")
    if method == "kernel":
        return _kernel_outcomes(fleet, events, T)
    if method == "stepwise":
        return _stepwise_outcomes(fleet, events, T)
    raise ValidationError(f"unknown method {method!r}")


def simulate_patrol(
    g: PatrolGraph, fleet: RobotFleet, events, T: float, *, method: str = "kernel", seed=None
) -> SimStats:
    """Run the fleet against a known event list and tally confirmed true events.

    ``method="kernel"`` jumps straight from each arrival to its detecting
    visit and from there to the first visit ``T`` later; visits in between
    cannot change the database for that event. ``method="stepwise"`` replays
    every visit in time order.
    """
    events = EventLog.from_events(events)
    return patrol_outcomes(g, fleet, events, T, method).stats(events, T, seed)


def conditioned_cycle_samples(tau, mu, T, lags, samples, rng=None):
    """Draw true events in one period and resolve them on the visit grid.

    Arrival ``t'`` is uniform on ``(0, tau]`` and the active time is
    ``T + Exponential(mu)``. Visits happen at ``k*tau + lag`` for each lag.
    Returns ``(arrival, departure, t_det, t_conf, confirmed)``.
    """
    if not (tau > 0 and mu > 0 and T > 0):
        raise ValidationError("tau, mu and T must be positive")
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples!r}")
    lags = np.sort(np.asarray(lags, dtype=np.float64))
    if lags.size == 0 or np.any(lags < 0) or np.any(lags >= tau):
        raise ValidationError(f"lags must lie in [0, {tau})")
    gen = np.random.default_rng(rng)
    arrival = tau - gen.uniform(0.0, tau, samples)
    departure = arrival + T + gen.exponential(1.0 / mu, samples)
    t_det, t_conf, ok = visit_outcomes(
        np.zeros(samples, dtype=np.int64), arrival, departure, lags[None, :], tau, T, CLOCK_TOL * T
    )
    return arrival, departure, t_det, t_conf, ok


def simulate_conditioned_cycle(tau, mu, T, lags, samples, rng=None) -> float:
    """Fraction of true events confirmed under the idealised single-vertex model."""
    return float(conditioned_cycle_samples(tau, mu, T, lags, samples, rng)[4].mean())


def specialized_outcomes(detection_fleet: RobotFleet, T: float, events) -> Outcomes:
    """Detection robots only record; each has a confirmation twin ``T`` behind it."""
    if not T > 0:
        raise ValidationError(f"T must be positive, got {T!r}")
    events = EventLog.from_events(events)
    det = _kernel_outcomes(detection_fleet, events, T).t_det
    seen = ~np.isnan(det)
    conf = np.where(seen, det + T, np.nan)
    confirmed = np.zeros(len(events), dtype=bool)
    confirmed[seen] = events.t_f[seen] >= conf[seen]
    return Outcomes(det, conf, confirmed)


def simulate_specialized(detection_fleet: RobotFleet, T: float, events, seed=None) -> SimStats:
    events = EventLog.from_events(events)
    return specialized_outcomes(detection_fleet, T, events).stats(events, T, seed)


@dataclass(frozen=True)
class PatrolConfig:
    """Everything one free-running replication needs."""

    graph: PatrolGraph
    fleet: RobotFleet
    params: Mapping = field(hash=False)
    T: float
    horizon: float


def run_replication(config: PatrolConfig, seed: int) -> SimStats:
    events = generate_events(config.params, config.horizon, seed)
    return simulate_patrol(config.graph, config.fleet, events, config.T, seed=seed)


def estimate_confirm_prob(config: PatrolConfig, replications: int, base_seed: int = 0, *, workers: int = 1) -> SimStats:
    """Pool ``replications`` independent runs seeded ``base_seed + i``.

    The result does not depend on ``workers``; replications are pooled in
    index order and pooling is a plain sum of counts.
    """
    if int(replications) != replications or replications < 1:
        raise ValidationError(f"replications must be >= 1, got {replications!r}")
    seeds = [base_seed + i for i in range(int(replications))]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(run_replication, [config] * len(seeds), seeds))
    else:
        runs = [run_replication(config, s) for s in seeds]
    return SimStats.pool(runs, seed=base_seed)
