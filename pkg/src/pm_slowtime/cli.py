"""Batch command line front end.

Usage::

    pm-slowtime <experiment> --config FILE [--out DIR]
    pm-slowtime <experiment> --preset NAME [--out DIR]

Experiments: ``simulate-discrete``, ``simulate-limit``, ``converge``,
``audits``, ``gamma``, ``slope``, ``wellprep``.  A run writes its CSV
artifacts, an ``audits.csv`` with every checked inequality, a
``summary.json`` and a ``manifest.json`` into the output directory.

Exit status: 0 when every enabled audit passed, 1 on audit failures,
2 on configuration errors (nothing is written), 3 on numerical aborts.
The environment variable ``PM_SLOWTIME_THREADS`` (default 1) parallelizes
grid-refinement ladders; results do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, io_utils
from .discrete_flow import IntegratorOptions, integrate_discrete
from .errors import (ConfigError, InvariantViolationError, JumpCollisionError,
                     NumericsError)
from .grid import GridFunction, PlateauFunction, sample_plateau
from .limit_flow import LimitOptions, integrate_limit
from .presets import PRESETS, get_preset

EXPERIMENTS = ("simulate-discrete", "simulate-limit", "converge", "audits",
               "gamma", "slope", "wellprep")

_DEFAULT_LADDERS = {
    "converge": [32, 64, 128, 256],
    "gamma": [25, 50, 100, 200],
    "slope": [64, 128, 256, 512],
    "wellprep": [64, 128, 256],
}

_KNOWN_KEYS = {
    "experiment", "initial", "n", "n_ladder", "t_end", "k", "sample_dt",
    "integrator", "limit", "seed", "count", "extra_jump", "include_state",
    "out_dir",
}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _parse_initial(cfg: dict, experiment: str):
    raw = cfg.get("initial")
    _require(raw is not None, "initial: required")
    _require(isinstance(raw, dict), "initial: expected an object")
    if "preset" in raw:
        try:
            return get_preset(raw["preset"])
        except KeyError as e:
            raise ConfigError(f"initial.preset: {e.args[0]}") from None
    if "grid" in raw:
        _require(experiment == "simulate-discrete",
                 "initial.grid: explicit grid data is only valid for simulate-discrete")
        g = raw["grid"]
        _require(isinstance(g, dict) and "n" in g and "values" in g,
                 "initial.grid: expected an object with fields n and values")
        try:
            return GridFunction(int(g["n"]), np.asarray(g["values"], dtype=float))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"initial.grid: {e}") from None
    if "jumps" in raw or "heights" in raw:
        _require("jumps" in raw and "heights" in raw,
                 "initial: jumps and heights must be given together")
        try:
            return PlateauFunction(np.asarray(raw["jumps"], dtype=float),
                                   np.asarray(raw["heights"], dtype=float))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"initial: {e}") from None
    raise ConfigError("initial: expected one of preset, jumps/heights, or grid")


def _positive(cfg: dict, key: str, default=None):
    v = cfg.get(key, default)
    if v is None:
        return None
    _require(isinstance(v, (int, float)) and v > 0, f"{key}: must be positive")
    return float(v)


def _parse_ladder(cfg: dict, experiment: str) -> list[int]:
    ladder = cfg.get("n_ladder", _DEFAULT_LADDERS[experiment])
    _require(isinstance(ladder, (list, tuple)) and len(ladder) >= 2,
             "n_ladder: expected a list of at least two grid sizes")
    out = []
    for v in ladder:
        _require(isinstance(v, int) and v >= 2, "n_ladder: entries must be integers >= 2")
        out.append(v)
    _require(all(b > a for a, b in zip(out, out[1:])),
             "n_ladder: entries must be strictly increasing")
    return out


def _parse_options(cfg: dict):
    raw = cfg.get("integrator", {})
    _require(isinstance(raw, dict), "integrator: expected an object")
    unknown = set(raw) - {"theta", "sample_dt", "bisect_tol"}
    _require(not unknown, f"integrator: unknown fields {sorted(unknown)}")
    try:
        iopts = IntegratorOptions(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"integrator: {e}") from None
    raw = cfg.get("limit", {})
    _require(isinstance(raw, dict), "limit: expected an object")
    unknown = set(raw) - {"rtol", "eps_collide", "sample_dt"}
    _require(not unknown, f"limit: unknown fields {sorted(unknown)}")
    try:
        lopts = LimitOptions(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"limit: {e}") from None
    return iopts, lopts


def validate_config(cfg: dict) -> dict:
    """Normalize and validate a raw config; raises :class:`ConfigError`."""
    _require(isinstance(cfg, dict), "config: expected a JSON object")
    unknown = set(cfg) - _KNOWN_KEYS
    _require(not unknown, f"config: unknown fields {sorted(unknown)}")
    experiment = cfg.get("experiment")
    _require(experiment in EXPERIMENTS,
             f"experiment: must be one of {', '.join(EXPERIMENTS)}")
    out: dict = {"experiment": experiment}
    iopts, lopts = _parse_options(cfg)
    out["integrator"] = iopts
    out["limit"] = lopts

    if experiment != "audits":
        out["initial"] = _parse_initial(cfg, experiment)

    if experiment == "simulate-discrete":
        if isinstance(out["initial"], PlateauFunction):
            n = cfg.get("n", 64)
            _require(isinstance(n, int) and n >= 1, "n: must be a positive integer")
            out["n"] = n
        out["t_end"] = _positive(cfg, "t_end", 0.75)
        out["include_state"] = bool(cfg.get("include_state", False))
    elif experiment == "simulate-limit":
        _require(isinstance(out["initial"], PlateauFunction),
                 "initial: simulate-limit needs a plateau function")
        out["t_end"] = _positive(cfg, "t_end", 0.75)
    elif experiment in ("converge", "gamma", "slope", "wellprep"):
        _require(isinstance(out["initial"], PlateauFunction),
                 f"initial: {experiment} needs a plateau function")
        out["n_ladder"] = _parse_ladder(cfg, experiment)
        if experiment == "converge":
            out["t_end"] = _positive(cfg, "t_end")  # optional
            out["sample_dt"] = _positive(cfg, "sample_dt", 0.005)
        if experiment == "gamma":
            k = cfg.get("k")
            if k is not None:
                _require(isinstance(k, int) and k >= 0, "k: must be an integer >= 0")
            out["k"] = k
        if experiment == "wellprep":
            extra = cfg.get("extra_jump", {"position": 0.15, "height_scale": 2.0})
            _require(isinstance(extra, dict) and "position" in extra,
                     "extra_jump: expected an object with a position field")
            pos = extra["position"]
            _require(isinstance(pos, (int, float)) and 0.0 < pos < 1.0,
                     "extra_jump.position: must lie in (0, 1)")
            scale = extra.get("height_scale", 2.0)
            _require(isinstance(scale, (int, float)) and scale > 1.0,
                     "extra_jump.height_scale: must exceed 1 (supercritical)")
            out["extra_jump"] = {"position": float(pos), "height_scale": float(scale)}
    elif experiment == "audits":
        count = cfg.get("count", 200)
        _require(isinstance(count, int) and count >= 1, "count: must be a positive integer")
        seed = cfg.get("seed", 0)
        _require(isinstance(seed, int) and seed >= 0, "seed: must be a nonnegative integer")
        out["count"] = count
        out["seed"] = seed
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PM_SLOWTIME_THREADS", "1")))
    except ValueError:
        return 1


def _run_simulate_discrete(cfg: dict, out: Path):
    initial = cfg["initial"]
    if isinstance(initial, PlateauFunction):
        try:
            u0 = sample_plateau(initial, cfg["n"])
        except JumpCollisionError as e:
            raise ConfigError(f"n: {e}") from None
    else:
        u0 = initial
    traj = integrate_discrete(u0, cfg["t_end"], cfg["integrator"])
    io_utils.discrete_trajectory_csv(traj, out / "trajectory.csv",
                                     include_state=cfg["include_state"])
    io_utils.extinctions_json(traj, out / "extinctions.json")
    return analysis.monotonicity_audit(traj)


def _run_simulate_limit(cfg: dict, out: Path):
    traj = integrate_limit(cfg["initial"], cfg["t_end"], cfg["limit"])
    io_utils.limit_trajectory_csv(traj, out / "limit.csv")
    io_utils.collisions_json(traj, out / "collisions.json")
    return analysis.limit_invariants_audit(traj)


def _decreasing_report(name: str, values, strict: bool = True) -> analysis.AuditReport:
    diffs = [b - a for a, b in zip(values, values[1:])]
    worst = max(diffs) if diffs else -1.0
    tol = 0.0 if strict else 1e-12
    return analysis.AuditReport(name=name, lhs=float(worst), rhs=0.0,
                                slack=-float(worst), tol=tol,
                                passed=bool(worst < tol if strict else worst <= tol),
                                context={"values": [float(v) for v in values]})


def _run_converge(cfg: dict, out: Path):
    table = analysis.convergence_study(
        cfg["initial"], cfg["n_ladder"], T=cfg.get("t_end"),
        sample_dt=cfg["sample_dt"], theta=cfg["integrator"].theta,
        limit_rtol=cfg["limit"].rtol, threads=_threads())
    io_utils.convergence_csv(table, out / "table.csv")
    return [
        _decreasing_report("sup-l2-decreasing", table.sup_l2_error),
        _decreasing_report("sup-unif-decreasing", table.sup_unif_error),
        _decreasing_report("tsing-decreasing", table.tsing_error),
    ]


def _run_audits(cfg: dict, out: Path):
    rng = np.random.default_rng(cfg["seed"])
    reports = []
    for _ in range(cfg["count"]):
        u, jumps = analysis.random_subcritical_state(rng)
        reports.extend(analysis.fundamental_estimates_audit(u, jumps, len(jumps)))
        v, w, jumps = analysis.random_plateau_pair(rng)
        reports.extend(analysis.jump_estimate_audit(v, w, jumps))
    return reports


def _run_gamma(cfg: dict, out: Path):
    res = analysis.gamma_probe(cfg["initial"], cfg["n_ladder"], k=cfg.get("k"))
    io_utils.gamma_csv(res, out / "gamma.csv")
    reports = [_decreasing_report("gamma-gap-decreasing", res.gaps)]
    worst_gap = min(res.gaps)
    reports.append(analysis.AuditReport(
        name="gamma-gap-nonnegative", lhs=-float(worst_gap), rhs=0.0,
        slack=float(worst_gap), tol=1e-12, passed=bool(worst_gap >= -1e-12),
        context={"limit": res.limit_value}))
    return reports


def _run_slope(cfg: dict, out: Path):
    res = analysis.slope_probe(cfg["initial"], cfg["n_ladder"])
    io_utils.slope_csv(res, out / "slope.csv")
    worst = min(s - res.limit_value for s in res.discrete_slopes)
    return [analysis.AuditReport(
        name="slope-liminf", lhs=float(res.limit_value),
        rhs=float(res.discrete_slopes[-1]),
        slack=float(res.discrete_slopes[-1] - res.limit_value),
        tol=1e-3 * max(1.0, res.limit_value), passed=res.liminf_ok,
        context={"worst_gap": float(worst)})]


def _run_wellprep(cfg: dict, out: Path):
    p = cfg["initial"]
    extra = cfg["extra_jump"]
    family = analysis.with_extra_jump(p, extra["position"], extra["height_scale"])
    res = analysis.well_preparation_probe(family, p, p.k, cfg["n_ladder"],
                                          theta=cfg["integrator"].theta)
    io_utils.wellprep_csv(res, out / "wellprep.csv")
    missing = sum(0 if ok else 1 for ok in res.extra_extinct)
    return [
        analysis.AuditReport(name="extra-jumps-extinct", lhs=float(missing),
                             rhs=0.0, slack=-float(missing), tol=0.5,
                             passed=missing == 0,
                             context={"s_n": [float(s) for s in res.s_n]}),
        _decreasing_report("energy-gap-decreasing", res.energy_gap),
    ]


_RUNNERS = {
    "simulate-discrete": _run_simulate_discrete,
    "simulate-limit": _run_simulate_limit,
    "converge": _run_converge,
    "audits": _run_audits,
    "gamma": _run_gamma,
    "slope": _run_slope,
    "wellprep": _run_wellprep,
}


def _config_echo(cfg: dict) -> dict:
    echo = {}
    for key, val in cfg.items():
        if isinstance(val, (IntegratorOptions, LimitOptions)):
            echo[key] = vars(val) | {}
        elif isinstance(val, PlateauFunction):
            echo[key] = json.loads(val.to_json())
        elif isinstance(val, GridFunction):
            echo[key] = json.loads(val.to_json())
        else:
            echo[key] = val
    return echo


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pm-slowtime",
        description="Batch simulations and certification runs for the "
                    "slow-time semidiscrete Perona-Malik flow.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON config file")
    src.add_argument("--preset", choices=sorted(PRESETS),
                     help="named initial datum with experiment defaults")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: ./runs/<experiment>)")
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except FileNotFoundError:
                raise ConfigError(f"config: file not found: {args.config}") from None
            except json.JSONDecodeError as e:
                raise ConfigError(f"config: invalid JSON: {e}") from None
            if "experiment" in raw and raw["experiment"] != args.experiment:
                raise ConfigError(
                    f"experiment: config says {raw['experiment']!r} but the "
                    f"command line says {args.experiment!r}")
            raw["experiment"] = args.experiment
        else:
            raw = {"experiment": args.experiment,
                   "initial": {"preset": args.preset}}
        cfg = validate_config(raw)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    out = args.out if args.out is not None else Path("runs") / args.experiment
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    try:
        reports = _RUNNERS[cfg["experiment"]](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (NumericsError, InvariantViolationError) as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0

    io_utils.audits_csv(reports, out / "audits.csv")
    passed = all(r.passed for r in reports)
    worst = min((r.slack for r in reports), default=0.0)
    io_utils.write_json(out / "summary.json", {
        "name": cfg["experiment"], "passed": passed, "worst_slack": worst,
        "reports": [{"name": r.name, "passed": r.passed, "slack": r.slack}
                    for r in reports],
    })
    io_utils.write_json(out / "manifest.json", {
        "config": _config_echo(cfg),
        "versions": {
            "pm_slowtime": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "seed": cfg.get("seed"),
        "threads": _threads(),
        "wall_time_s": wall,
    })
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: lhs={r.lhs:.6g} rhs={r.rhs:.6g} "
              f"slack={r.slack:.3g}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
