"""Command-line entry point: ``percolate <command> --config run.json``.

Commands: solve, oracle, simulate, coeffs, beliefs, rate, compare.
Exit codes: 0 ok, 2 configuration error, 3 numerical invariant failure,
4 tolerance breach in ``compare``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import kernels
from .analysis import (BeliefQuery, belief_cdf, fit_exponential_rate, reflect, tail_series,
                       tail_solver)
from .measure import NumericalInvariantError, kolmogorov_distance, mean, to_csv
from .ode import OdeParams, evolve
from .signals import LOW, ProfileSpec, SignalSpec, WorldState, check_fractions, initial_distribution
from .sim import SimConfig, run as run_sim
from .wild import SolveParams, wild_coefficients, wild_solution

log = logging.getLogger("percolate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


DEFAULT_TOLERANCES = {"wild_vs_oracle": 1e-4, "sim_ks": 0.01, "rate": None}


@dataclass
class RunConfig:
    profiles: list[dict]
    world: str
    prior: float
    lam: float
    m: int
    t: float
    step: float = 0.001
    epsilon: float = 1e-9
    max_terms: int = 200_000
    seed: int = 0
    stream: int = 0
    out_dir: str = "runs"
    dt: float = 1e-3
    window: list[float] | None = None
    n_agents: int = 100_000
    snapshot_times: list[float] | None = None
    seeds: list[int] | None = None
    threshold: float = 0.0
    times: list[float] | None = None
    b_values: list[float] | None = None
    tolerances: dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def profile_specs(self) -> list[ProfileSpec]:
        return [ProfileSpec(p["fraction"], tuple(SignalSpec(s["p_high"], s["p_low"]) for s in p["signals"]))
                for p in self.profiles]

    def world_state(self) -> WorldState:
        return WorldState(self.world, self.prior)

    def solve_params(self) -> SolveParams:
        return SolveParams(self.lam, self.t, self.m, self.epsilon, self.max_terms)

    def ode_params(self) -> OdeParams:
        lo, hi = self.window if self.window else (None, None)
        return OdeParams(self.lam, self.t, self.m, self.dt, lo, hi)

    def sim_config(self, seed: int | None = None) -> SimConfig:
        return SimConfig(self.n_agents, self.lam, self.m, self.t, self.world_state(),
                         tuple(self.profile_specs()), tuple(self.snapshot_times or [self.t]),
                         self.seed if seed is None else seed, self.stream, self.step)

    def rate_times(self) -> list[float]:
        if self.times:
            return list(self.times)
        return np.linspace(2.0 / self.lam, 6.0 / self.lam, 9).tolist()

    def mu0(self):
        return initial_distribution(self.profile_specs(), self.world_state(), self.step)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d


_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"lam"} | {"lambda"}
_REQUIRED = ("profiles", "world", "lambda", "m", "t")


def _field_error(name: str, msg: str) -> ConfigError:
    return ConfigError(f"field '{name}': {msg}")


def parse_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    world = raw.pop("world")
    prior = raw.pop("prior", None)
    if isinstance(world, dict):
        extra = set(world) - {"value", "prior"}
        if extra:
            raise _field_error("world", f"unknown key(s) {sorted(extra)}")
        prior = world.get("prior", prior)
        world = world.get("value")
    prior = 0.5 if prior is None else prior
    try:
        WorldState(world, prior)
    except ValueError as e:
        raise _field_error("world", str(e)) from None

    profiles = raw.pop("profiles")
    if not isinstance(profiles, list) or not profiles:
        raise _field_error("profiles", "must be a nonempty list")
    for i, p in enumerate(profiles):
        if not isinstance(p, dict) or set(p) - {"fraction", "signals"} or "fraction" not in p:
            raise _field_error(f"profiles[{i}]", "expected {fraction, signals}")
        p.setdefault("signals", [])
        for j, s in enumerate(p["signals"]):
            if not isinstance(s, dict) or set(s) != {"p_high", "p_low"}:
                raise _field_error(f"profiles[{i}].signals[{j}]", "expected {p_high, p_low}")
            try:
                SignalSpec(s["p_high"], s["p_low"])
            except (ValueError, TypeError) as e:
                raise _field_error(f"profiles[{i}].signals[{j}]", str(e)) from None
    total = math.fsum(p["fraction"] for p in profiles)
    if abs(total - 1.0) > 1e-12:
        raise _field_error("profiles", f"fractions sum to {total!r}, not 1")

    tol = dict(DEFAULT_TOLERANCES)
    user_tol = raw.pop("tolerances", {}) or {}
    bad = set(user_tol) - set(DEFAULT_TOLERANCES)
    if bad:
        raise _field_error("tolerances", f"unknown key(s) {sorted(bad)}")
    tol.update(user_tol)

    lam = raw.pop("lambda")
    cfg = RunConfig(profiles=profiles, world=world, prior=prior, lam=lam, tolerances=tol, **raw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    checks = [
        ("lambda", lambda: cfg.solve_params()),
        ("m", lambda: cfg.solve_params()),
        ("dt", lambda: cfg.ode_params()),
        ("profiles", lambda: check_fractions(cfg.profile_specs())),
        ("n_agents", lambda: cfg.sim_config()),
    ]
    if cfg.b_values:
        checks.append(("b_values", lambda: [BeliefQuery(b, cfg.prior) for b in cfg.b_values]))
    if not (isinstance(cfg.step, (int, float)) and cfg.step > 0):
        raise _field_error("step", f"must be positive, got {cfg.step!r}")
    if cfg.window is not None and (len(cfg.window) != 2 or cfg.window[0] >= cfg.window[1]):
        raise _field_error("window", "expected [lo, hi] with lo < hi")
    for name, check in checks:
        try:
            check()
        except (ValueError, TypeError) as e:
            raise _field_error(name, str(e)) from None


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_config(raw, overrides)


# ---------------------------------------------------------------- commands

def _out(cfg_or_dir, name: str) -> Path:
    d = Path(cfg_or_dir.out_dir if isinstance(cfg_or_dir, RunConfig) else cfg_or_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _summary(cfg: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "seed": cfg.seed, "backend": kernels.BACKEND,
            "config": cfg.as_dict(), **extra}


def cmd_solve(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    mu_t = wild_solution(cfg.mu0(), cfg.solve_params())
    runtime = time.perf_counter() - t0
    to_csv(mu_t, _out(cfg, "measure.csv"))
    s = _summary(cfg, "solve", mass_deficit=mu_t.deficit, mean=mean(mu_t), runtime=runtime,
                 step=mu_t.step, n_points=len(mu_t))
    _write_json(_out(cfg, "summary.json"), s)
    return s


def cmd_oracle(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    mu_t = evolve(cfg.mu0(), cfg.ode_params())
    runtime = time.perf_counter() - t0
    to_csv(mu_t, _out(cfg, "measure.csv"))
    s = _summary(cfg, "oracle", mass_deficit=mu_t.deficit, mean=mean(mu_t), runtime=runtime,
                 step=mu_t.step, n_points=len(mu_t))
    _write_json(_out(cfg, "summary.json"), s)
    return s


def cmd_simulate(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    res = run_sim(cfg.sim_config())
    runtime = time.perf_counter() - t0
    files = {}
    for t, mu in res.snapshots.items():
        name = f"snapshot_t{t!r}.csv"
        to_csv(mu, _out(cfg, name))
        files[repr(t)] = name
    s = _summary(cfg, "simulate", meeting_count=res.meeting_count, attendance=res.attendance,
                 stream=res.stream, snapshots=files, runtime=runtime)
    _write_json(_out(cfg, "summary.json"), s)
    return s


def cmd_coeffs(m: int, n: int, out_dir: str | None) -> str:
    c = wild_coefficients(m, n)
    text = _rows_csv(["n", "k_index", "a_value"],
                     [(i, c.k_index(i), c[i]) for i in range(1, n + 1)])
    if out_dir:
        _out(out_dir, "coeffs.csv").write_text(text)
    return text


def cmd_beliefs(cfg: RunConfig) -> dict:
    mu_t = wild_solution(cfg.mu0(), cfg.solve_params())
    bs = cfg.b_values or np.round(np.linspace(0.05, 0.95, 19), 10).tolist()
    rows = [(float(b), belief_cdf(mu_t, BeliefQuery(b, cfg.prior))) for b in bs]
    _out(cfg, "beliefs.csv").write_text(_rows_csv(["b", "pi_t_mass"], rows))
    s = _summary(cfg, "beliefs", mass_deficit=mu_t.deficit, n_values=len(rows))
    _write_json(_out(cfg, "summary.json"), s)
    return s


def _rate(cfg: RunConfig) -> tuple[list, Any]:
    mu0, a = cfg.mu0(), cfg.threshold
    if cfg.world == LOW:
        # mass above a in the low world is mass below -a for the reflected law
        mu0, a = reflect(mu0), -a
    series = tail_series(tail_solver(mu0, cfg.lam, cfg.m, a), a, cfg.rate_times())
    return series, fit_exponential_rate(series)


def cmd_rate(cfg: RunConfig) -> dict:
    series, fit = _rate(cfg)
    rows = [(t, v, math.log(v) if v > 0 else float("-inf")) for t, v in series]
    _out(cfg, "rate.csv").write_text(_rows_csv(["t", "tail_mass", "log_tail"], rows))
    s = _summary(cfg, "rate", rate=fit.rate, r_squared=fit.r_squared, intercept=fit.intercept)
    _write_json(_out(cfg, "rate.json"), s)
    return s


def cmd_compare(cfg: RunConfig) -> tuple[dict, bool]:
    mu0 = cfg.mu0()
    wild = wild_solution(mu0, cfg.solve_params())
    ode = evolve(mu0, cfg.ode_params())
    seeds = cfg.seeds or [cfg.seed]
    sim_ks = []
    for sd in seeds:
        res = run_sim(cfg.sim_config(seed=sd))
        sim_ks.append(kolmogorov_distance(res.snapshots[cfg.t], wild))
    series, fit = _rate(cfg)
    report = {
        "wild_vs_oracle_ks": kolmogorov_distance(wild, ode),
        "sim_vs_wild_ks": sim_ks,
        "sim_vs_wild_ks_median": float(np.median(sim_ks)),
        "wild_deficit": wild.deficit,
        "oracle_deficit": ode.deficit,
        "rate_fit": {"rate": fit.rate, "r_squared": fit.r_squared, "times": list(fit.times)},
    }
    tol = cfg.tolerances
    breaches = []
    if report["wild_vs_oracle_ks"] > tol["wild_vs_oracle"]:
        breaches.append("wild_vs_oracle")
    if report["sim_vs_wild_ks_median"] > tol["sim_ks"]:
        breaches.append("sim_ks")
    if tol.get("rate") is not None and abs(fit.rate - cfg.lam) > tol["rate"] * cfg.lam:
        breaches.append("rate")
    report["breaches"] = breaches
    s = _summary(cfg, "compare", report=report)
    _write_json(_out(cfg, "report.json"), s)
    return s, not breaches


# ---------------------------------------------------------------- argv

def build_parser() -> argparse.ArgumentParser:
    def add_common(p, default):
        p.add_argument("--seed", type=int, default=default)
        p.add_argument("--out-dir", default=default)
        p.add_argument("--step", type=float, default=default)
        p.add_argument("--epsilon", type=float, default=default)
        p.add_argument("-v", "--verbose", action="store_true", default=default or False)

    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    add_common(common, argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="percolate", description=__doc__.splitlines()[0])
    add_common(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "series solution of the type distribution at time t",
        "oracle": "direct RK4 integration of the same evolution",
        "simulate": "finite-population matching simulation",
        "beliefs": "cross-sectional posterior mass below each threshold b",
        "rate": "lower-tail mass over time and its fitted exponential rate",
        "compare": "solve, oracle, simulate and rate on one config, with a tolerance report",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--t", type=float)
        p.add_argument("--m", type=int)
        if name in ("oracle", "compare"):
            p.add_argument("--dt", type=float)
            p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
        if name in ("simulate", "compare"):
            p.add_argument("--n-agents", type=int)
    p = sub.add_parser("coeffs", parents=[common], help="series coefficients for group size m")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "coeffs":
            if args.m < 2 or args.n < 1:
                raise ConfigError("coeffs needs --m >= 2 and --n >= 1")
            sys.stdout.write(cmd_coeffs(args.m, args.n, args.out_dir))
            return EXIT_OK
        overrides = {"seed": args.seed, "out_dir": args.out_dir, "step": args.step,
                     "epsilon": args.epsilon, "t": args.t, "m": args.m,
                     "dt": getattr(args, "dt", None), "window": getattr(args, "window", None),
                     "n_agents": getattr(args, "n_agents", None)}
        cfg = load_config(args.config, overrides)
        if args.command == "compare":
            summary, ok = cmd_compare(cfg)
            print(json.dumps(summary["report"], indent=2, sort_keys=True))
            return EXIT_OK if ok else EXIT_TOLERANCE
        summary = {"solve": cmd_solve, "oracle": cmd_oracle, "simulate": cmd_simulate,
                   "beliefs": cmd_beliefs, "rate": cmd_rate}[args.command](cfg)
        summary = {k: v for k, v in summary.items() if k != "config"}
        print(json.dumps(summary, indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInvariantError as e:
        print(f"numerical invariant failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # parameter combinations only detectable while running (e.g. grid too wide)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_command())
