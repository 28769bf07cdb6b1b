"""Command-line front end.

Every subcommand reads an optional YAML run config (``--config``); flags
override config fields. Results go to stdout (or ``--out``) as YAML records
or CSV; errors go to stderr as one line::

    error kind=<validation|size-cap|usage> message="..."

Exit codes: 0 success, 1 validation/usage error, 2 infeasible instance or
size cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from edcpatrol import analytic, fileio, graph, offline, sim
from edcpatrol.errors import SizeCapError, ValidationError

COMMANDS = (
    "analyze",
    "simulate",
    "optimize-single",
    "optimize-two",
    "spacing-m",
    "sweep-tau",
    "sweep-lag",
    "offline-check",
    "reduce-tsptw",
)

SWEEP_TAU_COLUMNS = ("tau", "P_single", "P_two_equal", "P_two_optlag")
SWEEP_LAG_COLUMNS = ("lag", "P_two")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    graph: object = None  # path (relative to the config file) or inline mapping
    tour_mode: str = "exact"
    tour_length: Optional[float] = None
    lam: Optional[float] = None
    mu: Optional[float] = None
    vertex_rates: dict = field(default_factory=dict)
    T: Optional[float] = None
    robots: int = 1
    max_speed: float = 1.0
    speed: Optional[float] = None
    time_unit: float = 1.0
    seed: int = 0
    replications: int = 1
    horizon: Optional[float] = None
    tau: Optional[float] = None
    lags: Optional[list] = None
    tau_from: Optional[float] = None
    tau_to: Optional[float] = None
    tau_steps: int = 200
    lag_steps: int = 1000
    base_dir: Optional[Path] = None

    @classmethod
    def from_doc(cls, doc: dict, base_dir=None) -> "RunConfig":
        cfg = cls(base_dir=base_dir)
        flat = dict(doc)
        rates = flat.pop("rates", None) or {}
        sweep = flat.pop("sweep", None) or {}
        if not isinstance(rates, dict) or not isinstance(sweep, dict):
            raise ValidationError("config: rates and sweep must be mappings")
        if "lambda" in rates:
            flat["lam"] = rates["lambda"]
        if "mu" in rates:
            flat["mu"] = rates["mu"]
        if "vertices" in rates:
            flat["vertex_rates"] = rates["vertices"]
        flat.update(sweep)
        known = {f.name for f in fields(cls)} - {"base_dir"}
        for key, val in flat.items():
            if key not in known:
                raise ValidationError(f"config: unknown field {key!r}")
            setattr(cfg, key, val)
        return cfg

    def validate(self) -> None:
        for name in ("tour_length", "lam", "mu", "T", "speed", "horizon", "tau", "tau_from", "tau_to"):
            val = getattr(self, name)
            if val is not None and not (isinstance(val, (int, float)) and not isinstance(val, bool) and val > 0 and math.isfinite(val)):
                raise ValidationError(f"{name} must be a positive number, got {val!r}")
        for name in ("max_speed", "time_unit"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and val > 0):
                raise ValidationError(f"{name} must be a positive number, got {val!r}")
        for name, low in (("robots", 1), ("replications", 1), ("tau_steps", 1), ("lag_steps", 1)):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int) or val < low:
                raise ValidationError(f"{name} must be an integer >= {low}, got {val!r}")
        if self.tour_mode not in ("exact", "heuristic"):
            raise ValidationError(f"tour_mode must be exact or heuristic, got {self.tour_mode!r}")

    def need(self, *names):
        for n in names:
            if getattr(self, n) is None:
                raise ValidationError(f"missing required setting {n!r}")

    def load_graph(self):
        if self.graph is None:
            raise ValidationError("missing required setting 'graph'")
        return fileio.graph_from_doc(self.graph, self.base_dir)

    def tour_len(self) -> float:
        if self.tour_length is not None:
            return float(self.tour_length)
        return graph.tsp_tour(self.load_graph(), self.tour_mode).length

    def params_for(self, vertices) -> dict:
        out = {}
        for v in vertices:
            r = self.vertex_rates.get(v, {}) if self.vertex_rates else {}
            lam = r.get("lambda", self.lam)
            mu = r.get("mu", self.mu)
            if lam is None or mu is None:
                raise ValidationError(f"no rates for vertex {v!r}")
            out[v] = analytic.VertexParams(float(lam), float(mu))
        return out

    def common_mu(self) -> float:
        self.need("mu")
        return float(self.mu)


def _parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            raise UsageError(message)

    p = Parser(prog="edcpatrol", description="Event detection and confirmation patrolling toolkit.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    common = Parser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run config")
    common.add_argument("--out", type=Path, help="write output here instead of stdout")
    common.add_argument("--graph", help="graph YAML file")
    common.add_argument("--tour-mode", dest="tour_mode", choices=("exact", "heuristic"))
    common.add_argument("--tour-length", dest="tour_length", type=float)
    common.add_argument("--lambda", dest="lam", type=float, help="arrival rate (all vertices)")
    common.add_argument("--mu", type=float, help="departure rate (all vertices)")
    common.add_argument("-T", "--T", dest="T", type=float, help="critical time")
    common.add_argument("-m", "--robots", type=int)
    common.add_argument("--max-speed", dest="max_speed", type=float)
    common.add_argument("--speed", type=float)
    common.add_argument("--time-unit", dest="time_unit", type=float, help="speed time units per unit of T")
    common.add_argument("--seed", type=int)
    common.add_argument("--replications", type=int)
    common.add_argument("--horizon", type=float)
    common.add_argument("--tau", type=float)
    common.add_argument("--lags", type=float, nargs="+")
    common.add_argument("--tau-from", dest="tau_from", type=float)
    common.add_argument("--tau-to", dest="tau_to", type=float)
    common.add_argument("--tau-steps", dest="tau_steps", type=int)
    common.add_argument("--lag-steps", dest="lag_steps", type=int)
    common.add_argument("--instance", type=Path, help="offline or TSPTW instance YAML")
    helps = {
        "analyze": "print closed-form confirmation probabilities",
        "simulate": "Monte Carlo patrol simulation",
        "optimize-single": "single-robot speed policy",
        "optimize-two": "two-robot spacing policy",
        "spacing-m": "heuristic spacing for m robots",
        "sweep-tau": "CSV of probabilities versus period",
        "sweep-lag": "CSV of two-robot probability versus lag",
        "offline-check": "decide an offline instance and print a schedule",
        "reduce-tsptw": "build the offline instance for a TSPTW instance",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def _config(args) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.from_doc(fileio.load_yaml(args.config), args.config.parent)
    else:
        cfg = RunConfig()
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    if args.graph is not None:
        cfg.base_dir = None
    cfg.validate()
    return cfg


def _yaml(doc) -> str:
    return fileio.dump_yaml(doc)


def _policy_doc(r: analytic.PolicyResult) -> dict:
    doc = {"tau": r.tau, "speed": r.speed}
    if r.lag is not None:
        doc["lag"] = r.lag
    doc["probability"] = r.probability
    doc["candidate_log"] = [
        {"tau": t, **({} if lag is None else {"lag": lag}), "probability": p} for t, lag, p in r.candidate_log
    ]
    return doc


def _period(cfg: RunConfig) -> float:
    if cfg.tau is not None:
        return float(cfg.tau)
    speed = cfg.speed if cfg.speed is not None else cfg.max_speed
    return cfg.tour_len() / speed / cfg.time_unit


def cmd_analyze(cfg: RunConfig) -> tuple:
    cfg.need("T")
    tau = _period(cfg)
    m = cfg.robots
    doc = {"tau": tau, "robots": m, "n": analytic.n_of(cfg.T, tau / m)}
    if cfg.graph is not None and (cfg.lam is not None or cfg.vertex_rates):
        g = cfg.load_graph()
        params = cfg.params_for(g.vertices)
        per = {str(v): analytic.confirm_prob_single(tau / m, p.mu, cfg.T) for v, p in params.items() if p.lam > 0}
        doc["per_vertex"] = per
        doc["P_tour"] = analytic.confirm_prob_tour(list(params.values()), [tau / m] * len(params), cfg.T)
    if cfg.mu is not None:
        doc["P_single"] = analytic.confirm_prob_single(tau / m, cfg.mu, cfg.T)
    return _yaml(doc), 0


def _fleet(cfg: RunConfig, g):
    tour = graph.tsp_tour(g, cfg.tour_mode)
    speed = (cfg.speed if cfg.speed is not None else cfg.max_speed) * cfg.time_unit
    if cfg.lags is not None:
        return sim.RobotFleet(tour, speed, tuple(cfg.lags))
    return sim.RobotFleet.equally_spaced(tour, speed, cfg.robots)


def cmd_simulate(cfg: RunConfig) -> tuple:
    cfg.need("T", "horizon")
    g = cfg.load_graph()
    fleet = _fleet(cfg, g)
    params = cfg.params_for(g.vertices)
    config = sim.PatrolConfig(g, fleet, params, float(cfg.T), float(cfg.horizon))
    stats = sim.estimate_confirm_prob(config, cfg.replications, cfg.seed)
    doc = {"tau": fleet.period, "lags": list(fleet.lags), **stats.as_record(), "replications": cfg.replications}
    return _yaml(doc), 0


def cmd_optimize_single(cfg: RunConfig) -> tuple:
    cfg.need("T")
    r = analytic.optimize_single_robot(cfg.tour_len(), cfg.max_speed, cfg.common_mu(), cfg.T, time_unit=cfg.time_unit)
    return _yaml(_policy_doc(r)), 0


def cmd_optimize_two(cfg: RunConfig) -> tuple:
    cfg.need("T")
    r = analytic.optimize_two_robots(cfg.tour_len(), cfg.max_speed, cfg.common_mu(), cfg.T, time_unit=cfg.time_unit)
    return _yaml(_policy_doc(r)), 0


def cmd_spacing_m(cfg: RunConfig) -> tuple:
    cfg.need("T")
    tau = _period(cfg)
    new_tau, gaps = analytic.m_robot_spacing(tau, cfg.T, cfg.robots)
    return _yaml({"tau": new_tau, "gaps": gaps, "lags": [0.0] + list(np.cumsum(gaps[:-1]).tolist())}), 0


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def sweep_tau_rows(T: float, mu: float, taus) -> list:
    rows = []
    for tau in taus:
        tau = float(tau)
        single = analytic.confirm_prob_single(tau, mu, T)
        equal = analytic.confirm_prob_two_robots(tau, mu, T, tau / 2)
        best = max(analytic.confirm_prob_two_robots(tau, mu, T, x) for x in analytic.optimal_lag_candidates(tau, T))
        rows.append((tau, single, equal, best))
    return rows


def cmd_sweep_tau(cfg: RunConfig) -> tuple:
    cfg.need("T", "mu", "tau_from", "tau_to")
    if not cfg.tau_to > cfg.tau_from:
        raise ValidationError("sweep range is empty: tau_to must exceed tau_from")
    taus = np.linspace(cfg.tau_from, cfg.tau_to, cfg.tau_steps)
    return _csv(SWEEP_TAU_COLUMNS, sweep_tau_rows(cfg.T, cfg.mu, taus)), 0


def cmd_sweep_lag(cfg: RunConfig) -> tuple:
    cfg.need("T", "mu")
    tau = _period(cfg)
    n = cfg.lag_steps
    lags = tau * (np.arange(n) + 1) / (n + 1)
    vals = analytic.two_robot_curve(tau, cfg.mu, cfg.T, lags)
    return _csv(SWEEP_LAG_COLUMNS, zip(lags, vals)), 0


def cmd_offline_check(cfg: RunConfig, instance: Path) -> tuple:
    if instance is None:
        raise ValidationError("offline-check needs --instance")
    inst = fileio.offline_from_doc(fileio.load_yaml(instance), instance.parent)
    sched = offline.offline_feasible(inst)
    if sched is None:
        return _yaml({"feasible": False, "true_events": len(inst.true_events())}), 2
    return _yaml({"feasible": True, "true_events": len(inst.true_events()), "schedule": fileio.schedule_to_doc(sched)}), 0


def cmd_reduce_tsptw(cfg: RunConfig, instance: Path) -> tuple:
    if instance is None:
        raise ValidationError("reduce-tsptw needs --instance")
    t = fileio.tsptw_from_doc(fileio.load_yaml(instance), instance.parent)
    return _yaml(fileio.offline_to_doc(offline.reduce_tsptw(t))), 0


HANDLERS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "optimize-single": cmd_optimize_single,
    "optimize-two": cmd_optimize_two,
    "spacing-m": cmd_spacing_m,
    "sweep-tau": cmd_sweep_tau,
    "sweep-lag": cmd_sweep_lag,
}


def _fail(kind: str, message: str, code: int, stderr) -> int:
    message = " ".join(str(message).split()).replace('"', "'")
    print(f'error kind={kind} message="{message}"', file=stderr)
    return code


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = _parser().parse_args(argv)
        if args.command is None:
            raise UsageError(f"expected a command: {' | '.join(COMMANDS)}")
        cfg = _config(args)
        if args.command == "offline-check":
            text, code = cmd_offline_check(cfg, args.instance)
        elif args.command == "reduce-tsptw":
            text, code = cmd_reduce_tsptw(cfg, args.instance)
        else:
            text, code = HANDLERS[args.command](cfg)
    except UsageError as exc:
        return _fail("usage", exc, 1, stderr)
    except SizeCapError as exc:
        return _fail("size-cap", exc, 2, stderr)
    except ValidationError as exc:
        return _fail("validation", exc, 1, stderr)
    if args.out is not None:
        args.out.write_text(text)
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
