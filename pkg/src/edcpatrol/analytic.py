"""Closed-form confirmation probabilities and periodic-patrol policy optimizers.

All probabilities are conditional on the event being true (active for at
least ``T``). Every exponential is evaluated with a non-positive argument, so
the formulas stay finite for any ``mu * tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from edcpatrol.errors import ValidationError

MULTIPLE_TOL = 1e-9


@dataclass(frozen=True)
class VertexParams:
    """Arrival rate ``lam`` and departure rate ``mu`` (both 1/time) of a vertex.

    A zero arrival rate is accepted and marks a vertex that never sees events.
    """

    lam: float
    mu: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValidationError(f"arrival rate must be >= 0, got {self.lam!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValidationError(f"departure rate must be > 0, got {self.mu!r}")


@dataclass(frozen=True)
class PolicyResult:
    tau: float
    speed: float
    probability: float
    lag: Optional[float] = None
    candidate_log: list = field(default_factory=list)


def _positive(**kw):
    for name, val in kw.items():
        if not (val > 0 and math.isfinite(val)):
            raise ValidationError(f"{name} must be positive and finite, got {val!r}")


def is_multiple(x: float, unit: float, tol: float = MULTIPLE_TOL) -> bool:
    """True when ``x`` is an integer multiple of ``unit`` up to relative ``tol``."""
    r = x / unit
    k = round(r)
    return k >= 1 and abs(r - k) <= tol * r


def n_of(T: float, tau: float) -> int:
    """Whole periods that fit strictly inside ``T``: ``n*tau < T <= (n+1)*tau``."""
    _positive(T=T, tau=tau)
    r = T / tau
    if is_multiple(T, tau):
        return round(r) - 1
    return math.floor(r)


def _windows(T, tau):
    # a = T - n*tau in (0, tau], b = (n+1)*tau - T in [0, tau); a + b = tau
    n = n_of(T, tau)
    if is_multiple(T, tau):
        return n, tau, 0.0
    b = (n + 1) * tau - T
    return n, tau - b, b


def _ratio(x):
    # (1 - e^{-x}) / x, accurate for small x
    return -math.expm1(-x) / x


def log_confirm_prob_single(tau: float, mu: float, T: float) -> float:
    _positive(tau=tau, mu=mu, T=T)
    _, _, b = _windows(T, tau)
    x = mu * tau
    return -mu * b + math.log(-math.expm1(-x)) - math.log(x)


def confirm_prob_single(tau: float, mu: float, T: float) -> float:
    """Probability that a true event is confirmed under visits every ``tau``.

    Equals ``exp(-mu*((n+2)*tau - T)) * (exp(mu*tau) - 1) / (mu*tau)``,
    evaluated as ``exp(-mu*((n+1)*tau - T)) * (1 - exp(-mu*tau)) / (mu*tau)``.
    """
    return math.exp(log_confirm_prob_single(tau, mu, T))


def confirm_prob_tour(params: Sequence[VertexParams], taus: Sequence[float], T: float) -> float:
    """Arrival-weighted confirmation probability over a tour's vertices."""
    params = list(params)
    taus = list(taus)
    if not params or len(params) != len(taus):
        raise ValidationError(f"need matching nonempty lists, got {len(params)} params and {len(taus)} periods")
    total = sum(p.lam for p in params)
    if not total > 0:
        raise ValidationError("at least one vertex needs a positive arrival rate")
    acc = 0.0
    for p, tau in zip(params, taus):
        if p.lam > 0:
            acc += p.lam * confirm_prob_single(tau, p.mu, T)
    return acc / total


def _two_robot_branches(tau, mu, T, lag, a, b):
    """Values of the three pieces at ``lag`` (numpy-broadcast)."""
    lag = np.asarray(lag, dtype=np.float64)
    c = _ratio(mu * tau)
    scale = 1.0 / (mu * tau)
    # pieces valid on their own intervals; clip exponents so off-interval
    # evaluations (only used at shared boundaries) stay finite
    first = np.exp(-mu * np.maximum(b - lag, 0.0)) * c
    third = np.exp(-mu * np.maximum(lag - a, 0.0)) * c
    if a <= b:
        middle = scale * (
            np.exp(-mu * np.maximum(b - lag, 0.0)) * -np.expm1(-mu * lag)
            + np.exp(-mu * np.maximum(lag - a, 0.0)) * -np.expm1(-mu * (tau - lag))
        )
    else:
        middle = scale * math.exp(-mu * b) * (-np.expm1(-mu * lag) - np.expm1(-mu * (tau - lag)))
    return first, middle, third


def two_robot_curve(tau: float, mu: float, T: float, lags) -> np.ndarray:
    """Vectorised two-robot confirmation probability over an array of lags.

    Branch boundaries sit at ``T - n*tau`` and ``(n+1)*tau - T``; a lag on a
    boundary (relative tolerance 1e-9) gets the larger adjacent piece.
    """
    _positive(tau=tau, mu=mu, T=T)
    lags = np.asarray(lags, dtype=np.float64)
    if np.any(~(lags > 0)) or np.any(~(lags < tau)):
        raise ValidationError(f"lag must lie in (0, {tau}), got {lags.min()!r}..{lags.max()!r}")
    _, a, b = _windows(T, tau)
    lo, hi = (a, b) if a <= b else (b, a)
    first, middle, third = _two_robot_branches(tau, mu, T, lags, a, b)
    tol = MULTIPLE_TOL * tau
    on_lo = np.abs(lags - lo) <= tol
    on_hi = np.abs(lags - hi) <= tol
    out = np.where(lags < lo, first, np.where(lags <= hi, middle, third))
    out = np.where(on_lo, np.maximum(first, middle), out)
    out = np.where(on_hi, np.maximum(middle, third), out)
    if lo == hi:
        out = np.where(on_lo, np.maximum(np.maximum(first, middle), third), out)
    return out


def confirm_prob_two_robots(tau: float, mu: float, T: float, t_lag: float) -> float:
    """Two robots on one tour of period ``tau``, the second ``t_lag`` behind."""
    _positive(tau=tau, mu=mu, T=T)
    if not 0 < t_lag < tau:
        raise ValidationError(f"t_lag must lie in (0, {tau}), got {t_lag!r}")
    return float(two_robot_curve(tau, mu, T, [t_lag])[0])


def optimal_lag_candidates(tau: float, T: float) -> list[float]:
    """Lags at which the two-robot probability can attain its maximum."""
    n = n_of(T, tau)
    raw = [tau / 2, T - n * tau, (n + 1) * tau - T, math.fmod((n + 2) * tau - T, tau)]
    out: list[float] = []
    tol = MULTIPLE_TOL * tau
    for x in raw:
        if tol < x < tau - tol and all(abs(x - y) > tol for y in out):
            out.append(x)
    return out


def _period_for_multiple(span: float, tau_min: float) -> Optional[float]:
    # smallest span/k >= tau_min, k a positive integer
    if is_multiple(span, tau_min):
        return tau_min
    k = math.floor(span / tau_min)
    return span / k if k >= 1 else None


def optimize_single_robot(
    tsp_length: float, v_max: float, mu: float, T: float, *, time_unit: float = 1.0
) -> PolicyResult:
    """Choose between full speed and slowing to the next period dividing ``T``.

    ``time_unit`` converts the ``tsp_length / v_max`` time base into the unit
    of ``T`` and ``1/mu`` (60 for metres, m/s and minutes).
    """
    _positive(tsp_length=tsp_length, v_max=v_max, mu=mu, T=T, time_unit=time_unit)
    tau_min = tsp_length / v_max / time_unit
    log = [(tau_min, None, confirm_prob_single(tau_min, mu, T))]
    peak = _period_for_multiple(T, tau_min)
    if peak is not None and peak != tau_min:
        log.append((peak, None, confirm_prob_single(peak, mu, T)))
    tau, _, p = max(log, key=lambda r: r[2])
    return PolicyResult(tau=tau, speed=tsp_length / (tau * time_unit), probability=p, candidate_log=log)


def optimize_two_robots(
    tsp_length: float, v_max: float, mu: float, T: float, *, time_unit: float = 1.0
) -> PolicyResult:
    """Best lag at full speed versus equal spacing at the next divisor of ``2T``.

    The log also records equal spacing at the largest divisor of ``2T`` below
    ``tau_min``; that period needs more than ``v_max`` and is never chosen.
    """
    _positive(tsp_length=tsp_length, v_max=v_max, mu=mu, T=T, time_unit=time_unit)
    tau_min = tsp_length / v_max / time_unit
    log = []
    for lag in optimal_lag_candidates(tau_min, T):
        log.append((tau_min, lag, confirm_prob_two_robots(tau_min, mu, T, lag)))
    feasible = list(log)
    tau_n = _period_for_multiple(2 * T, tau_min)
    if tau_n is not None and tau_n != tau_min:
        row = (tau_n, tau_n / 2, confirm_prob_two_robots(tau_n, mu, T, tau_n / 2))
        log.append(row)
        feasible.append(row)
    k_fast = round(2 * T / tau_min) + 1 if is_multiple(2 * T, tau_min) else math.floor(2 * T / tau_min) + 1
    tau_fast = 2 * T / k_fast
    log.append((tau_fast, tau_fast / 2, confirm_prob_two_robots(tau_fast, mu, T, tau_fast / 2)))
    tau, lag, p = max(feasible, key=lambda r: r[2])
    return PolicyResult(tau=tau, speed=tsp_length / (tau * time_unit), probability=p, lag=lag, candidate_log=log)


def m_robot_spacing(tau: float, T: float, m: int) -> tuple[float, list[float]]:
    """Heuristic spacing of ``m`` robots on one tour.

    Returns the adjusted period and the ``m`` successive gaps between robots
    (the last gap closes the cycle), so the gaps sum to the period.
    """
    _positive(tau=tau, T=T)
    if int(m) != m or m < 2:
        raise ValidationError(f"need at least 2 robots, got {m!r}")
    m = int(m)
    if is_multiple(tau / m, T):
        return tau, [tau / m] * m
    if tau < m * T:
        new = _period_for_multiple(m * T, tau)
        return new, [new / m] * m
    return tau, [T] * (m - 1) + [tau - (m - 1) * T]
