"""Experiment driver: ``fedmoo run | sweep | verify | report``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime divergence,
4 verification failure.  Output directories are immutable run artifacts:
``rounds.csv`` plus ``summary.json`` per run, and ``sweep_summary.json`` at
the sweep root.  Nothing is overwritten without ``--force``.  The default
output root is ``$FEDMOO_OUT`` (falling back to ``./runs``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import load_config, load_sweep
from .core import ConfigError
from .federation import run_experiment
from .problems import build_problem
from .reporting import (DEFAULT_EPS, build_summary, read_rounds_csv, summarize_columns,
                        write_rounds_csv, write_summary_json)
from .verify import run_battery

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_VERIFY = 4

OUT_ROOT_ENV = "FEDMOO_OUT"


def _out_root() -> str:
    return os.environ.get(OUT_ROOT_ENV, os.path.join(".", "runs"))


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _prepare_dir(out_dir: str, force: bool) -> str | None:
    """Create the run directory; refuse to clobber existing outputs without force."""
    existing = [f for f in ("rounds.csv", "summary.json", "sweep_summary.json")
                if os.path.exists(os.path.join(out_dir, f))]
    if existing and not force:
        return f"{out_dir} already contains {existing[0]}; pass --force to overwrite"
    os.makedirs(out_dir, exist_ok=True)
    return None


def _execute_run(config, raw, out_dir: str, jobs: int) -> int:
    problem = build_problem(config)
    traj = run_experiment(config, problem, n_jobs=jobs)
    if not traj.records:
        return _fail(f"run produced no rounds ({traj.termination})", EXIT_DIVERGED)
    write_rounds_csv(os.path.join(out_dir, "rounds.csv"), traj)
    write_summary_json(os.path.join(out_dir, "summary.json"),
                       build_summary(traj, raw, problem))
    if traj.termination != "completed":
        print(f"{config.name}: {traj.termination} (partial log written to {out_dir})",
              file=sys.stderr)
        return EXIT_DIVERGED
    print(f"{config.name}: {len(traj.records)} rounds -> {out_dir}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config, raw = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_USAGE)
    except OSError as exc:
        return _fail(str(exc), EXIT_USAGE)
    out_dir = args.out or os.path.join(_out_root(), config.name)
    problem = _prepare_dir(out_dir, args.force)
    if problem is not None:
        return _fail(problem, EXIT_USAGE)
    try:
        return _execute_run(config, raw, out_dir, args.jobs)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_USAGE)


def cmd_sweep(args) -> int:
    try:
        spec = load_sweep(args.config)
        members = spec.member_configs()
    except (ConfigError, OSError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    out_dir = args.out or os.path.join(_out_root(), f"sweep-{spec.axis}")
    err = _prepare_dir(out_dir, args.force)
    if err is not None:
        return _fail(err, EXIT_USAGE)

    def one(member):
        value, config, raw = member
        run_dir = os.path.join(out_dir, f"{spec.axis}={value}")
        prep = _prepare_dir(run_dir, args.force)
        if prep is not None:
            return value, run_dir, EXIT_USAGE, prep
        try:
            code = _execute_run(config, raw, run_dir, 1)
        except ConfigError as exc:
            return value, run_dir, EXIT_USAGE, str(exc)
        return value, run_dir, code, None

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, members))
    else:
        results = [one(member) for member in members]

    entries = []
    worst = EXIT_OK
    for value, run_dir, code, err_msg in results:
        entry = {"value": value, "dir": os.path.basename(run_dir),
                 "status": "ok" if code == EXIT_OK else f"error({code})"}
        if err_msg:
            entry["error"] = err_msg
        summary_path = os.path.join(run_dir, "summary.json")
        if os.path.exists(summary_path):
            with open(summary_path) as fh:
                member_summary = json.load(fh)
            entry["thresholds"] = member_summary.get("thresholds")
            entry["rate_fits"] = member_summary.get("rate_fits")
            entry["final"] = member_summary.get("final")
        entries.append(entry)
        worst = max(worst, code)
    sweep_summary = {"axis": spec.axis, "values": list(spec.values), "members": entries}
    write_summary_json(os.path.join(out_dir, "sweep_summary.json"), sweep_summary)
    print(f"sweep over {spec.axis}: {len(entries)} runs -> {out_dir}")
    return worst


def cmd_verify(args) -> int:
    results = run_battery(level=args.level)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY


def _load_run(run_dir: str):
    cols = read_rounds_csv(os.path.join(run_dir, "rounds.csv"))
    with open(os.path.join(run_dir, "summary.json")) as fh:
        summary = json.load(fh)
    return cols, summary


def cmd_report(args) -> int:
    rows = []
    tables = []
    failures = 0
    for run_dir in args.runs:
        run_id = os.path.basename(os.path.normpath(run_dir))
        try:
            cols, summary = _load_run(run_dir)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            print(f"skipping {run_dir}: {exc}", file=sys.stderr)
            failures += 1
            continue
        f_min = summary.get("f_min")
        derived = summarize_columns(cols, f_min=f_min, eps_list=DEFAULT_EPS)
        tables.append((run_id, derived))
        S = cols["lambda"].shape[1]
        for r, t in enumerate(cols["t"]):
            for s in range(S):
                rows.append((run_id, int(t), f"lambda_{s + 1}", cols["lambda"][r, s]))
                rows.append((run_id, int(t), f"loss_{s + 1}", cols["losses"][r, s]))
            for name in ("d_norm_sq", "dbar_norm_sq", "running_min_dbar",
                         "delta_Q", "fw_gap", "lambda_drift"):
                rows.append((run_id, int(t), name, cols[name][r]))

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "report.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write("run_id,t,metric,value\n")
        for run_id, t, metric, value in rows:
            cell = "" if np.isnan(value) else repr(float(value))
            fh.write(f"{run_id},{t},{metric},{cell}\n")

    for run_id, derived in tables:
        print(f"== {run_id} ({derived['rounds']} rounds)")
        for name, fit in derived["rate_fits"].items():
            print(f"   {name:18s} {fit['model']:12s} slope={fit['slope']:+.4g} "
                  f"residual={fit['residual']:.3g}")
        for name, eps_map in derived["thresholds"].items():
            hits = ", ".join(f"{eps}: {t if t is not None else '-'}"
                             for eps, t in eps_map.items())
            print(f"   {name:18s} rounds-to-threshold  {hits}")
    print(f"long-format CSV -> {csv_path}")
    return EXIT_OK if failures == 0 else EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedmoo",
                                     description="Federated multi-objective optimization "
                                                 "experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment from a config file")
    p_run.add_argument("--config", required=True, help="path to the experiment config")
    p_run.add_argument("--out", help="output directory (default $FEDMOO_OUT/<name>)")
    p_run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p_run.add_argument("--jobs", type=int, default=1, help="client update threads")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a one-axis sweep")
    p_sweep.add_argument("--config", required=True, help="path to the sweep file")
    p_sweep.add_argument("--out", help="sweep output root")
    p_sweep.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep members")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the built-in verification battery")
    p_verify.add_argument("--level", choices=("quick", "full"), default="quick")
    p_verify.set_defaults(func=cmd_verify)

    p_report = sub.add_parser("report", help="merge run outputs into a plot-ready CSV")
    p_report.add_argument("runs", nargs="+", help="run directories to merge")
    p_report.add_argument("--out", default=".", help="where to write report.csv")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
