"""Command line interface: ``ebus-cid <command> [options]``.

Exit codes: 0 ok, 2 usage or input error, 3 infeasible model, 4 solver
failure, 5 time limit reached without a solution.

Every output file gets a ``<output>.manifest.json`` sidecar describing the
run. Its ``digest`` covers everything except the ``volatile`` section
(timings, start time, worker count), so reruns with the same inputs produce
the same digest.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .datagen import (
    DistSpec,
    generate_grid_network,
    load_samples,
    parse_dist,
    sample_energy,
    save_samples,
)
from .milp.model import MilpError, SolveStatus, SolverFailure, TooManyBinaries
from .models import DEFAULT_BIG_M, DEFAULT_EPSILON, BoUConfig, DrccConfig, GammaPolicy
from .network import (
    load_design,
    load_network,
    save_design,
    save_network,
    validate_network,
)
from .simulation import ChargingMode, SimConfig, battery_lifetime, run_monte_carlo
from .solve import Backend, ModelKind, SolveOptions, solve_design

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4
EXIT_TIMEOUT = 5

SWEEP_PARAMS = ("gamma", "theta", "samples-n", "fleet", "station-cost")
SWEEP_CSV_HEADER = [
    "param", "value", "line_id", "status", "objective", "station_cost",
    "battery_kwh", "feasibility_pct",
]
CONFIG_SECTIONS = ("network", "model", "uncertainty", "simulation", "sweep")
# kept out of the digest: worker count and file locations (inputs are digested by content)
VOLATILE_ARGS = ("jobs", "config", "out", "network", "design", "samples", "benchmark")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# manifests
# --------------------------------------------------------------------------

def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def build_manifest(command: str, args: argparse.Namespace, inputs: dict,
                   wall_time_s: float, started: str) -> dict:
    stable_args = {
        k: v for k, v in sorted(vars(args).items())
        if k not in VOLATILE_ARGS and k != "handler" and not k.startswith("_")
    }
    seeds = {k: v for k, v in stable_args.items() if "seed" in k}
    body = {
        "command": command,
        "args": stable_args,
        "seeds": seeds,
        "tool_version": __version__,
        "inputs": {name: file_digest(p) for name, p in sorted(inputs.items()) if p},
    }
    digest = hashlib.sha256(_canonical(body).encode()).hexdigest()
    return {
        **body,
        "digest": digest,
        "volatile": {
            "wall_time_s": wall_time_s,
            "started_at": started,
            "jobs": getattr(args, "jobs", None),
            "paths": {k: getattr(args, k) for k in VOLATILE_ARGS[1:] if getattr(args, k, None)},
        },
    }


def write_manifest(out: Path, manifest: dict) -> Path:
    path = out.with_name(out.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _inputs(args, *names) -> dict:
    found = {n: getattr(args, n, None) for n in names}
    if getattr(args, "config", None):
        found["config"] = args.config
    return found


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------

def _load_network(path) -> "NetworkInstance":  # noqa: F821
    try:
        inst = load_network(path)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read network {path}: {exc}") from exc
    problems = validate_network(inst)
    if problems:
        raise UsageError("invalid network: " + "; ".join(problems))
    return inst


def _load_design(path, inst):
    try:
        design = load_design(path)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read design {path}: {exc}") from exc
    known = {s.id for s in inst.stops}
    missing = [l.id for l in inst.lines if l.id not in design.capacity_kwh]
    if missing:
        raise UsageError(f"design has no capacity for lines {missing}")
    extra = sorted(set(design.capacity_kwh) - {l.id for l in inst.lines})
    if extra:
        raise UsageError(f"design has capacities for unknown lines {extra}")
    unknown = sorted(set(design.placement) - known)
    if unknown:
        raise UsageError(f"design places chargers at unknown stops {unknown}")
    return design


def _parse_dist(text: str) -> DistSpec:
    try:
        return parse_dist(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _drcc_config(args, inst, samples=None, theta=None) -> DrccConfig:
    if samples is None:
        if not args.samples:
            raise UsageError("the drcc model needs --samples")
        try:
            samples = load_samples(args.samples)
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot read samples {args.samples}: {exc}") from exc
    try:
        return DrccConfig(
            args.theta if theta is None else theta, samples, args.epsilon, args.big_m
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _options(args) -> SolveOptions:
    return SolveOptions(
        backend=Backend(args.backend),
        solver_cmd=args.solver_cmd,
        time_limit_s=args.time_limit,
        max_binaries=args.max_binaries,
        decompose=not args.no_decompose,
    )


def _bou_config(args, gamma=None) -> BoUConfig:
    try:
        return BoUConfig(args.gamma if gamma is None else gamma, GammaPolicy(args.gamma_policy))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _solve(args, inst, kind: ModelKind, bou=None, drcc=None):
    """Run a solve and map failures to (outcome, exit code)."""
    try:
        outcome = solve_design(inst, kind, bou, drcc, _options(args))
    except (SolverFailure, TooManyBinaries, MilpError) as exc:
        return None, EXIT_SOLVER, str(exc)
    if outcome.design is None:
        if outcome.status is SolveStatus.INFEASIBLE:
            return outcome, EXIT_INFEASIBLE, "model is infeasible"
        if outcome.status is SolveStatus.TIME_LIMIT:
            return outcome, EXIT_TIMEOUT, "time limit reached without a solution"
        return outcome, EXIT_SOLVER, f"solver status {outcome.status.value}"
    return outcome, EXIT_OK, ""


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_gen_grid(args) -> int:
    try:
        inst = generate_grid_network(args.lines, args.stops, args.seed,
                                     spacing_km=args.spacing_km, fleet_size=args.fleet)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    save_network(inst, out)
    total = sum(float(l.segment_means().sum()) for l in inst.lines)
    print(f"nodes={len(inst.stops)} lines={len(inst.lines)} total_mean_kwh={total:.6f}")
    return _finish(args, "gen-grid", out, {})


def cmd_gen_samples(args) -> int:
    inst = _load_network(args.network)
    dist = _parse_dist(args.dist)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    out = Path(args.out)
    save_samples(sample_energy(inst, dist, args.n, args.seed), out)
    print(f"lines={len(inst.lines)} n={args.n} dist={dist.to_text()}")
    return _finish(args, "gen-samples", out, _inputs(args, "network"))


def cmd_solve(args) -> int:
    inst = _load_network(args.network)
    kind = ModelKind(args.model)
    bou = _bou_config(args) if kind is ModelKind.BOU else None
    drcc = _drcc_config(args, inst) if kind is ModelKind.DRCC else None
    outcome, code, message = _solve(args, inst, kind, bou, drcc)
    if code != EXIT_OK:
        print(f"error: {message}", file=sys.stderr)
        return code
    out = Path(args.out)
    manifest = _manifest(args, "solve", _inputs(args, "network", "samples"))
    extra = {
        "model": kind.value,
        "status": outcome.status.value,
        "gap": outcome.gap if math.isfinite(outcome.gap) else None,
        "manifest_digest": manifest["digest"],
    }
    save_design(outcome.design, out, extra)
    write_manifest(out, manifest)
    print(
        f"status={outcome.status.value} objective={outcome.objective:.6f} "
        f"gap={outcome.gap:.6g} wall_time_s={outcome.wall_time_s:.3f}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = _load_network(args.network)
    design = _load_design(args.design, inst)
    dist = _parse_dist(args.dist)
    try:
        cfg = SimConfig(dist, args.scenarios, args.runs, args.seed, ChargingMode(args.mode),
                        args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = run_monte_carlo(design, inst, cfg)
    out = Path(args.out)
    report.write_csv(out)
    print(f"network_feasibility_pct={report.network_average:.4f}")
    return _finish(args, "simulate", out, _inputs(args, "network", "design"))


def cmd_lifetime(args) -> int:
    inst = _load_network(args.network)
    design = _load_design(args.design, inst)
    try:
        report = battery_lifetime(design, inst)
        if args.benchmark:
            bench = battery_lifetime(_load_design(args.benchmark, inst), inst)
            report = report.compare_to(bench)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    report.write_csv(out)
    print(f"g1={report.metadata['g1']:g} g2={report.metadata['g2']:g}")
    if report.network_relative_diff_pct is not None:
        print(f"network_relative_cost_diff_pct={report.network_relative_diff_pct:.6f}")
    return _finish(args, "lifetime", out, _inputs(args, "network", "design", "benchmark"))


def _sweep_values(args) -> list:
    raw = [v.strip() for v in (args.values or "").split(",") if v.strip()]
    if not raw:
        raise UsageError("--values must list at least one value")
    try:
        if args.param in ("samples-n", "fleet"):
            vals = [int(v) for v in raw]
        else:
            vals = [float(v) for v in raw]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    return vals


def _sweep_row(args, inst, value):
    """Solve (and optionally simulate) one sweep point; returns rows and exit code."""
    kind = ModelKind(args.model)
    started = time.process_time()
    gamma, theta = args.gamma, args.theta
    samples = None
    work = inst
    if args.param == "gamma":
        gamma = value
    elif args.param == "theta":
        theta = value
    elif args.param == "fleet":
        work = inst.with_fleet_size(value)
    elif args.param == "station-cost":
        work = inst.with_costs(inst.costs.replace(station_cost={
            t: c * value for t, c in inst.costs.station_cost.items()
        }))
    elif args.param == "samples-n":
        samples = sample_energy(inst, _parse_dist(args.sample_dist), value, args.sample_seed)
    bou = _bou_config(args, gamma) if kind is ModelKind.BOU else None
    drcc = None
    if kind is ModelKind.DRCC:
        if samples is None and not args.samples:
            samples = sample_energy(inst, _parse_dist(args.sample_dist), args.sample_n,
                                    args.sample_seed)
        drcc = _drcc_config(args, inst, samples, theta)
    outcome, code, _ = _solve(args, work, kind, bou, drcc)
    rows = []
    if code != EXIT_OK:
        status = outcome.status.value if outcome is not None else "SolverError"
        for line in inst.lines:
            rows.append([args.param, value, line.id, status, "", "", "", ""])
        return rows, code, time.process_time() - started
    design = outcome.design
    rates = {}
    if args.simulate_dist:
        cfg = SimConfig(_parse_dist(args.simulate_dist), args.scenarios, args.runs, args.seed)
        rates = run_monte_carlo(design, work, cfg).line_rates
    for line in inst.lines:
        rows.append([
            args.param, value, line.id, outcome.status.value,
            f"{design.objective_eur:.6f}", f"{design.station_cost_eur:.6f}",
            f"{design.capacity_kwh[line.id]:.6f}",
            f"{rates[line.id]:.6f}" if line.id in rates else "",
        ])
    return rows, EXIT_OK, time.process_time() - started


def cmd_sweep(args) -> int:
    inst = _load_network(args.network)
    values = _sweep_values(args)
    if ModelKind(args.model) is ModelKind.DRCC and args.param != "samples-n" and args.samples:
        _drcc_config(args, inst)  # fail early on unreadable samples
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda v: _sweep_row(args, inst, v), values))
    else:
        results = [_sweep_row(args, inst, v) for v in values]
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_CSV_HEADER)
        for rows, _, _ in results:
            w.writerows(rows)
    timing = out.with_name(out.stem + ".timing.csv")
    with timing.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "cpu_s"])
        for value, (_, _, cpu) in zip(values, results):
            w.writerow([args.param, value, f"{cpu:.6f}"])
    codes = [code for _, code, _ in results if code != EXIT_OK]
    failed = len(codes)
    print(f"rows={len(values)} failed={failed}")
    _finish(args, "sweep", out, _inputs(args, "network", "samples"))
    return codes[0] if codes else EXIT_OK


# --------------------------------------------------------------------------
# plumbing
# --------------------------------------------------------------------------

def _manifest(args, command, inputs) -> dict:
    return build_manifest(command, args, inputs,
                          time.perf_counter() - args._t0, args._started)


def _finish(args, command, out: Path, inputs) -> int:
    write_manifest(out, _manifest(args, command, inputs))
    return EXIT_OK


def _add_solver_flags(p):
    p.add_argument("--model", choices=[k.value for k in ModelKind], default="cid")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--gamma-policy", choices=[g.value for g in GammaPolicy],
                   default=GammaPolicy.CONSTANT.value)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--big-m", type=float, default=DEFAULT_BIG_M)
    p.add_argument("--samples", help="energy sample CSV (drcc model)")
    p.add_argument("--backend", choices=[b.value for b in Backend], default="bundled")
    p.add_argument("--solver-cmd", default=None,
                   help="external solver command with {lp}, {sol} and {time} placeholders")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--max-binaries", type=int, default=24)
    p.add_argument("--no-decompose", action="store_true",
                   help="solve all lines in one model even when they share no stops")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebus-cid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file with defaults for any flag")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-grid", help="generate a grid network")
    p.add_argument("--lines", type=int, required=True)
    p.add_argument("--stops", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spacing-km", type=float, default=1.0)
    p.add_argument("--fleet", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_gen_grid)

    p = sub.add_parser("gen-samples", help="draw energy samples for a network")
    p.add_argument("--network", required=True)
    p.add_argument("--dist", default="uniform:mubar,muhat")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_gen_samples)

    p = sub.add_parser("solve", help="solve a design model")
    p.add_argument("--network", required=True)
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo trip feasibility of a design")
    p.add_argument("--network", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--dist", default="uniform:0,muhat")
    p.add_argument("--scenarios", type=int, default=100)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=[m.value for m in ChargingMode],
                   default=ChargingMode.LINEAR_CAPPED.value)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("lifetime", help="battery cycle life of a design")
    p.add_argument("--network", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--benchmark", default=None, help="design to compare cost per cycle against")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_lifetime)

    p = sub.add_parser("sweep", help="solve over a range of one parameter")
    p.add_argument("--network", required=True)
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--values", default="", help="comma-separated values")
    _add_solver_flags(p)
    p.add_argument("--sample-dist", default="uniform:mubar,muhat",
                   help="distribution for generated samples (drcc)")
    p.add_argument("--sample-n", type=int, default=20)
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--simulate-dist", default=None,
                   help="also simulate each design with this distribution")
    p.add_argument("--scenarios", type=int, default=100)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)
    return parser


def _config_defaults(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    defaults = {}
    for key, section in data.items():
        if key not in CONFIG_SECTIONS or not isinstance(section, dict):
            raise UsageError(
                f"config key {key!r} is not one of {', '.join(CONFIG_SECTIONS)}"
            )
        for flag, value in section.items():
            defaults[flag.replace("-", "_")] = value
    return defaults


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            defaults = _config_defaults(known.config)
            for action in parser._subparsers._group_actions:  # one subparsers action
                for sp in action.choices.values():
                    own = {a.dest for a in sp._actions}
                    sp.set_defaults(**{k: v for k, v in defaults.items() if k in own})
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    args._t0 = time.perf_counter()
    args._started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
