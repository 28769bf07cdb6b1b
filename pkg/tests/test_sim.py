import math

import numpy as np
import pytest
from scipy import stats

from edcpatrol.analytic import VertexParams, confirm_prob_single, n_of
from edcpatrol.errors import ValidationError
from edcpatrol.graph import metric_closure, tour_from_order, tsp_tour
from edcpatrol.sim import (
    Event,
    EventLog,
    PatrolConfig,
    RobotFleet,
    SimStats,
    conditioned_cycle_samples,
    estimate_confirm_prob,
    generate_events,
    patrol_outcomes,
    simulate_conditioned_cycle,
    simulate_patrol,
    simulate_specialized,
    specialized_outcomes,
    with_replay_robots,
)

pytestmark = pytest.mark.filterwarnings("error::RuntimeWarning")


def two_vertex(tau):
    """Tour a -> b -> a with period ``tau`` at speed 1."""
    g = metric_closure("ab", [("a", "b", tau / 2)])
    return g, tour_from_order(g, "ab")


def assert_no_false_positives(events, out, T):
    events = EventLog.from_events(events)
    assert not np.any(out.confirmed & ~events.true_mask(T))


class TestGenerate:
    def test_renewal_mean(self):
        ev = generate_events({"a": VertexParams(1.0, 1.0)}, 1e5, 1)
        cycle = np.diff(np.concatenate([[0.0], ev.t_f]))
        assert cycle.mean() == pytest.approx(2.0, rel=0.01)

    def test_true_fraction(self):
        ev = generate_events({"a": VertexParams(1.0, 1.0)}, 2e5, 2)
        n = len(ev)
        frac = ev.true_mask(1.0).mean()
        p = math.exp(-1)
        assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_deterministic(self):
        params = {"a": VertexParams(0.3, 1.0), "b": VertexParams(2.0, 0.5)}
        a = generate_events(params, 1e4, 11)
        b = generate_events(params, 1e4, 11)
        c = generate_events(params, 1e4, 12)
        for col in ("vidx", "t_s", "t_f"):
            np.testing.assert_array_equal(getattr(a, col), getattr(b, col))
        assert not np.array_equal(a.t_s, c.t_s)

    def test_vertex_streams_independent_of_other_vertices(self):
        one = generate_events({"a": VertexParams(0.3, 1.0), "b": VertexParams(2.0, 0.5)}, 1e4, 3)
        two = generate_events({"a": VertexParams(0.3, 1.0), "b": VertexParams(9.0, 9.0)}, 1e4, 3)
        np.testing.assert_array_equal(one.t_s[one.vidx == 0], two.t_s[two.vidx == 0])

    def test_disjoint_and_within_horizon(self):
        ev = generate_events({"a": VertexParams(5.0, 5.0), "b": VertexParams(1.0, 0.1)}, 1e3, 4)
        ev.check_disjoint()
        assert ev.t_f.max() <= 1e3
        assert np.all(ev.t_s > 0)

    def test_zero_rate_vertex_has_no_events(self):
        ev = generate_events({"a": VertexParams(0.0, 1.0), "b": VertexParams(1.0, 1.0)}, 100, 5)
        assert set(ev.vertices) == {"b"}

    def test_rejects_horizon(self):
        with pytest.raises(ValidationError):
            generate_events({"a": VertexParams(1.0, 1.0)}, 0, 1)

    def test_poisson_arrivals_are_uniform(self):
        # departures almost immediate, so the process is effectively Poisson
        H = 1000.0
        ev = generate_events({"a": VertexParams(2.0, 1e7)}, H, 6)
        res = stats.kstest(ev.t_s / H, "uniform")
        assert res.pvalue > 0.01


class TestVisits:
    def test_immortal_event_confirmed_first_visit_after_T(self):
        g, tour = two_vertex(1.0)
        fleet = RobotFleet(tour, 1.0)
        out = patrol_outcomes(g, fleet, [Event(0, "a", 0.3, math.inf)], 2.5)
        assert out.t_det[0] == 1.0 and out.t_conf[0] == 4.0 and out.confirmed[0]

    def test_event_between_visits_missed(self):
        g, tour = two_vertex(1.0)
        fleet = RobotFleet(tour, 1.0)
        events = [Event(0, "a", 0.1, 0.9)]
        s = simulate_patrol(g, fleet, events, 0.5)
        assert (s.true_events, s.confirmed_true, s.detected_true) == (1, 0, 0)

    def test_confirmation_at_departure_counts(self):
        g, tour = two_vertex(1.0)
        out = patrol_outcomes(g, RobotFleet(tour, 1.0), [Event(0, "a", 0.5, 3.0)], 2.0)
        assert out.t_conf[0] == 3.0 and out.confirmed[0]

    def test_false_event_never_confirmed(self):
        g, tour = two_vertex(1.0)
        out = patrol_outcomes(g, RobotFleet(tour, 1.0), [Event(0, "a", 0.5, 2.9)], 3.0)
        assert not out.confirmed[0]

    def test_vertex_off_tour(self):
        g = metric_closure("abc", [("a", "b", 1), ("b", "c", 1)])
        tour = tour_from_order(g, "ab")
        with pytest.raises(ValidationError):
            simulate_patrol(g, RobotFleet(tour, 1.0), [Event(0, "c", 0, 5)], 1.0)

    def test_overlapping_events_rejected(self):
        g, tour = two_vertex(1.0)
        with pytest.raises(ValidationError):
            simulate_patrol(g, RobotFleet(tour, 1.0), [Event(0, "a", 0, 5), Event(1, "a", 4, 6)], 1.0)

    def test_fleet_validation(self):
        _, tour = two_vertex(1.0)
        for lags in [(0.5,), (0.0, 0.0), (0.0, 1.0), (0.0, 0.6, 0.3)]:
            with pytest.raises(ValidationError):
                RobotFleet(tour, 1.0, lags)

    def test_stepwise_matches_kernel(self):
        g = metric_closure("abcd", [("a", "b", 1.0), ("b", "c", 2.0), ("c", "d", 1.5), ("d", "a", 0.5)])
        tour = tsp_tour(g)
        params = {v: VertexParams(0.4, 0.6) for v in "abcd"}
        ev = generate_events(params, 3000, 9)
        for lags in [(0.0,), (0.0, 1.7), (0.0, 0.4, 3.1)]:
            fleet = RobotFleet(tour, 1.0, lags)
            a = patrol_outcomes(g, fleet, ev, 2.2, "kernel")
            b = patrol_outcomes(g, fleet, ev, 2.2, "stepwise")
            np.testing.assert_allclose(a.t_det, b.t_det, atol=1e-9, equal_nan=True)
            np.testing.assert_array_equal(a.confirmed, b.confirmed)
            conf = a.confirmed
            np.testing.assert_allclose(a.t_conf[conf], b.t_conf[conf], atol=1e-9)
            assert_no_false_positives(ev, a, 2.2)
            assert_no_false_positives(ev, b, 2.2)

    def test_unknown_method(self):
        g, tour = two_vertex(1.0)
        with pytest.raises(ValidationError):
            patrol_outcomes(g, RobotFleet(tour, 1.0), [], 1.0, method="fast")


class TestAccuracy:
    @pytest.mark.slow
    def test_free_running_matches_closed_form(self):
        tau, mu, T, lam = 1.0, 0.8, 1.3, 0.05
        g, tour = two_vertex(tau)
        ev = generate_events({"a": VertexParams(lam, mu)}, 1e6 * (1 / lam + 1 / mu), 21)
        assert len(ev) > 0.99e6
        s = simulate_patrol(g, RobotFleet(tour, 1.0), ev, T)
        assert s.false_positives == 0
        assert abs(s.estimate - confirm_prob_single(tau, mu, T)) <= 3 * s.ci_halfwidth + 0.01

    @pytest.mark.parametrize(
        "tau,mu,T,lags,expected",
        [
            (14.5, 1 / 75, 120, [0.0], 0.7905),
            (14.5, 1 / 75, 120, [0.0, 4.0], 0.9221),
            (14.5, 1 / 75, 120, [0.0, 7.25], 0.9128),
            (1.0, 1.0, 1.0, [0.0], 0.6321),
        ],
    )
    def test_conditioned_reference_values(self, tau, mu, T, lags, expected):
        n = 10**6
        est = simulate_conditioned_cycle(tau, mu, T, lags, n, 5)
        sigma = math.sqrt(expected * (1 - expected) / n)
        assert abs(est - expected) <= 3 * sigma + 5e-4

    def test_tiny_T_limit(self):
        # with T -> 0 a detected event still needs the next visit, one period later
        tau, mu, T, n = 1.0, 0.5, 1e-9, 10**6
        expected = math.exp(-mu * tau) * -math.expm1(-mu * tau) / (mu * tau)
        assert confirm_prob_single(tau, mu, T) == pytest.approx(expected, rel=1e-8)
        est = simulate_conditioned_cycle(tau, mu, T, [0.0], n, 8)
        assert abs(est - expected) <= 3 * math.sqrt(expected * (1 - expected) / n)

    @pytest.mark.parametrize("tau,mu,T", [(14.5, 1 / 75, 120), (1.0, 1.0, 1.0), (0.7, 2.0, 1.9), (3.0, 0.4, 1.0)])
    def test_single_robot_boundary_predicate(self, tau, mu, T):
        arr, dep, t_det, t_conf, ok = conditioned_cycle_samples(tau, mu, T, [0.0], 20_000, 3)
        seen = dep >= tau
        assert np.all(t_det[seen] == tau) and np.all(np.isnan(t_det[~seen]))
        n = n_of(T, tau)
        np.testing.assert_array_equal(ok, dep >= (n + 2) * tau)

    def test_conditioned_validation(self):
        with pytest.raises(ValidationError):
            simulate_conditioned_cycle(1, 1, 1, [1.0], 10)
        with pytest.raises(ValidationError):
            simulate_conditioned_cycle(1, 1, 1, [0.0], 0)


def random_fleet_run(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(3, 7))
    pts = rng.random((k, 2)) * 10
    names = [f"v{i}" for i in range(k)]
    edges = [(names[i], names[j], float(np.hypot(*(pts[i] - pts[j])))) for i in range(k) for j in range(i + 1, k)]
    g = metric_closure(names, edges)
    tour = tsp_tour(g)
    speed = float(rng.uniform(0.5, 2))
    tau = tour.length / speed
    m = int(rng.integers(1, 4))
    lags = (0.0,) + tuple(sorted(rng.uniform(0, tau, m - 1)))
    fleet = RobotFleet(tour, speed, lags)
    T = float(rng.uniform(0.2, 2.0) * tau)
    params = {v: VertexParams(float(rng.uniform(0.01, 0.2)), float(rng.uniform(0.2, 2) / T)) for v in names}
    events = generate_events(params, 200 * tau, int(seed))
    return g, fleet, T, events


class TestSpecialized:
    @pytest.mark.parametrize("seed", range(50))
    def test_confirms_exactly_late_enough_departures(self, seed):
        g, fleet, T, ev = random_fleet_run(seed)
        special = specialized_outcomes(fleet, T, ev)
        det = patrol_outcomes(g, fleet, ev, T).t_det
        seen = ~np.isnan(det)
        expected = np.zeros(len(ev), dtype=bool)
        expected[seen] = ev.t_f[seen] >= det[seen] + T
        np.testing.assert_array_equal(special.confirmed, expected)
        assert_no_false_positives(ev, special, T)

    @pytest.mark.parametrize("seed", range(50))
    def test_never_beats_dual_capability_fleet(self, seed):
        g, fleet, T, ev = random_fleet_run(seed)
        combined = with_replay_robots(fleet, T)
        special = simulate_specialized(fleet, T, ev)
        both = simulate_patrol(g, combined, ev, T)
        assert special.confirmed_true <= both.confirmed_true
        assert special.false_positives == both.false_positives == 0

    def test_empty(self):
        _, tour = two_vertex(1.0)
        s = simulate_specialized(RobotFleet(tour, 1.0), 1.0, [])
        assert (s.true_events, s.confirmed_true, s.false_positives, s.estimate) == (0, 0, 0, 0.0)


def parking_config(horizon=2e5):
    g = metric_closure("abc", [("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)])
    tour = tsp_tour(g)
    params = {v: VertexParams(0.02, 0.5) for v in "abc"}
    return PatrolConfig(g, RobotFleet(tour, 1.0), params, 2.0, horizon)


class TestReplications:
    def test_single_replication_is_direct_run(self):
        cfg = parking_config()
        pooled = estimate_confirm_prob(cfg, 1, base_seed=4)
        direct = simulate_patrol(cfg.graph, cfg.fleet, generate_events(cfg.params, cfg.horizon, 4), cfg.T, seed=4)
        assert pooled == direct

    def test_seeds_agree_statistically(self):
        cfg = parking_config(horizon=1e6)
        a = estimate_confirm_prob(cfg, 1, base_seed=0)
        b = estimate_confirm_prob(cfg, 1, base_seed=1000)
        assert a.true_events > 1000
        assert abs(a.estimate - b.estimate) <= 3 * math.hypot(a.std_error, b.std_error)

    def test_ci_shrinks_with_replications(self):
        cfg = parking_config()
        one = estimate_confirm_prob(cfg, 4, base_seed=0)
        two = estimate_confirm_prob(cfg, 8, base_seed=0)
        assert two.ci_halfwidth / one.ci_halfwidth == pytest.approx(1 / math.sqrt(2), rel=0.2)

    def test_workers_do_not_change_result(self):
        cfg = parking_config(horizon=5e4)
        assert estimate_confirm_prob(cfg, 3, 7, workers=1) == estimate_confirm_prob(cfg, 3, 7, workers=2)

    def test_bitwise_determinism(self):
        cfg = parking_config(horizon=5e4)
        assert estimate_confirm_prob(cfg, 2, 1).as_record() == estimate_confirm_prob(cfg, 2, 1).as_record()

    @pytest.mark.parametrize("r", [0, -1, 1.5])
    def test_rejects_replications(self, r):
        with pytest.raises(ValidationError):
            estimate_confirm_prob(parking_config(), r)


def test_stats_record():
    s = SimStats(true_events=100, confirmed_true=90, false_positives=0, seed=3)
    rec = s.as_record()
    assert rec["estimate"] == 0.9
    assert rec["ci_halfwidth"] == pytest.approx(1.959963984540054 * math.sqrt(0.09 / 100))
    assert SimStats.pool([s, s]).confirmed_true == 180


def test_replay_fleet_contains_originals():
    _, tour = two_vertex(10.0)
    f = with_replay_robots(RobotFleet(tour, 1.0, (0.0, 3.0)), 12.0)
    assert f.lags == pytest.approx((0.0, 2.0, 3.0, 5.0))
    f2 = with_replay_robots(RobotFleet(tour, 1.0), 10.0)
    assert f2.lags == (0.0,)
