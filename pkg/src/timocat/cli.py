"""Command-line entry point.

    timocat simulate          --config run.ini --out results/
    timocat certificate       --config run.ini --out results/ [--margin 0.5]
    timocat verify            --config run.ini --out results/ [--tol 1e-9]
    timocat sweep             --config run.ini --out results/ --param mu --values 0.5,1,2 [--jobs 2]
    timocat check-dissipation --config run.ini --out results/ [--threshold 1e-6]

Exit status is 0 when every requested check passed, 1 when a check failed
and 2 on errors; errors are also printed as a JSON object on stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .certificate import choose_constants, verify_certificate
from .config import RunConfig, emit_config, parse_config
from .diagnostics import (
    COMPONENTS,
    dissipation_residual,
    energy_series,
    fit_decay_rate,
    m2_monitor,
    shift_trajectory,
    trajectory_table,
)
from .dynamics import simulate
from .errors import MuZero, TimocatError

CSV_COLUMNS = ("t", "E") + COMPONENTS + ("dissipation_residual", "h2_norm", "h3_norm")
SWEEP_COLUMNS = ("param", "value", "fitted_rate", "r_squared", "certified_2alpha", "E_final")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_clean(data), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _fmt(value) -> str:
    return "%.17g" % value


def write_trajectory_csv(path: Path, table: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in zip(*(table[name] for name in CSV_COLUMNS)):
            writer.writerow([_fmt(v) for v in row])


def _run(cfg: RunConfig):
    traj = shift_trajectory(simulate(cfg.sim_config(), cfg.initial_state()))
    return traj


def _certificate_or_none(cfg: RunConfig):
    try:
        return choose_constants(cfg.params, cfg.margin)
    except MuZero:
        return None


def _diagnostics(cfg, traj, cert) -> dict:
    E = energy_series(traj, cfg.params)
    fit = fit_decay_rate(traj.times, E)
    alpha = cert.alpha if cert is not None else 0.0
    out = fit.to_dict()
    out.update({
        "m2_final": float(m2_monitor(traj, alpha)[-1]),
        "alpha": alpha,
        "E0": float(E[0]),
        "E_final": float(E[-1]),
        "samples": len(traj),
        "max_abs_dissipation_residual": float(np.max(np.abs(dissipation_residual(traj, cfg.params)))),
    })
    return out


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    traj = _run(cfg)
    write_trajectory_csv(out / "trajectory.csv", trajectory_table(traj, cfg.params))
    write_json(out / "diagnostics.json", _diagnostics(cfg, traj, _certificate_or_none(cfg)))
    return 0


def cmd_certificate(cfg: RunConfig, out: Path) -> int:
    cert = choose_constants(cfg.params, cfg.margin)
    write_json(out / "certificate.json", cert.to_dict())
    return 0


def cmd_verify(cfg: RunConfig, out: Path, tol: float = 1e-9) -> int:
    cert = choose_constants(cfg.params, cfg.margin)
    traj = _run(cfg)
    report = verify_certificate(traj, cfg.params, cert, tol, law=cfg.law)
    fit = fit_decay_rate(traj.times, energy_series(traj, cfg.params))
    summary = report.summary()
    summary["fitted_rate"] = fit.rate
    summary["certified_2alpha"] = 2 * cert.alpha
    summary["rate_bound_ok"] = fit.rate >= 2 * cert.alpha - 1e-6
    summary["passed"] = bool(report.passed and summary["rate_bound_ok"])
    write_trajectory_csv(out / "trajectory.csv", trajectory_table(traj, cfg.params))
    write_json(out / "certificate.json", cert.to_dict())
    write_json(out / "verify.json", summary)
    # nonlinear runs are advisory: the certificate is a linear statement
    return 0 if summary["passed"] or summary["advisory"] else 1


def sweep_row(cfg: RunConfig, param: str, value: float) -> dict:
    run = cfg.with_param(param, value)
    traj = _run(run)
    fit = fit_decay_rate(traj.times, energy_series(traj, run.params))
    cert = _certificate_or_none(run)
    return {
        "param": param,
        "value": value,
        "fitted_rate": fit.rate,
        "r_squared": fit.r_squared,
        "certified_2alpha": 2 * cert.alpha if cert is not None else float("nan"),
        "E_final": float(energy_series(traj, run.params)[-1]),
    }


def _sweep_task(args):
    return sweep_row(*args)


def cmd_sweep(cfg: RunConfig, out: Path, param: str, values, jobs: int = 1) -> int:
    tasks = [(cfg, param, float(v)) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([row["param"]] + [_fmt(row[c]) for c in SWEEP_COLUMNS[1:]])
    return 0


def cmd_check_dissipation(cfg: RunConfig, out: Path, threshold: float = 1e-6) -> int:
    # the finite-difference derivative needs every step, not the output stride
    traj = _run(replace(cfg, sample_every=1))
    resid = dissipation_residual(traj, cfg.params)
    worst = float(np.max(np.abs(resid)))
    passed = worst < threshold
    write_json(out / "dissipation.json", {
        "max_abs_relative_residual": worst,
        "threshold": threshold,
        "samples": len(traj),
        "passed": passed,
    })
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timocat", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--margin", type=float, help="override the certificate margin")
        return p

    add("simulate", "integrate and write trajectory.csv + diagnostics.json")
    add("certificate", "write certificate.json")
    add("verify", "simulate and check the certificate inequalities").add_argument(
        "--tol", type=float, default=1e-9)
    sweep = add("sweep", "vary one physics parameter and write sweep.csv")
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--jobs", type=int, default=1)
    add("check-dissipation", "check the energy dissipation identity").add_argument(
        "--threshold", type=float, default=1e-6)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = parse_config(args.config)
        if args.margin is not None:
            cfg = replace(cfg, margin=args.margin)
            if not 0 < cfg.margin < 1:
                raise ValueError("margin must lie in (0, 1)")
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(emit_config(cfg), encoding="utf-8")
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "certificate":
            return cmd_certificate(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.tol)
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            return cmd_sweep(cfg, out, args.param, values, args.jobs)
        return cmd_check_dissipation(cfg, out, args.threshold)
    except (TimocatError, ValueError, KeyError, TypeError, OSError) as exc:
        name = getattr(exc, "name", None)
        error = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(name, str):
            error["key"] = name
        print(json.dumps(error, sort_keys=True))
        return 2


if __name__ == "__main__":
    sys.exit(main())
