"""Command-line front end: lifetime sweeps, calibration, grid-value reports.

Subcommands:
  simulate  run a (cells x scenarios x drive variants) grid of lifetimes
  fit       calibrate degradation parameters against aging dataset files
  tvd       pair V2G runs with their baselines and report TvD + trend
  validate  quick self-checks on the bundled fixtures

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import math
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .duty import DriveVariant, Scenario, build_schedule, bundled_drive_profile
from .engine import (DEFAULT_JUMP_TOL, run_lifetime, write_summary,
                     write_trajectory)
from .errors import CellwearError, ConfigError
from .fitting import fit_pipeline, load_dataset
from .metrics import (TrendPoint, breakdown_from_fractions, trend_report,
                      tvd_from_numbers)
from .params import resolve_cell

log = logging.getLogger("cellwear")

SUMMARY_ROWS = [
    ("days", "Days"),
    ("norm_throughput_ah", "Norm. thru. (Ah/Ah)"),
    ("c_p_retention_pct", "C_p retention %"),
    ("c_n_retention_pct", "C_n retention %"),
    ("lli_pct", "LLI %"),
    ("lli_sei_pct", "LLI_sei %"),
    ("lli_sei_diss_pct", "LLI_sei+diss %"),
    ("lli_plating_pct", "LLI_plating %"),
    ("lli_crack_pct", "LLI_crack %"),
    ("lli_lam_pct", "LLI_lam %"),
]


def _setup_logging():
    level = os.environ.get("CELLWEAR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _run_one(cell_ref: str, scenario: str, variant: str, mode: str,
             out_dir: str, jump_tol: float) -> dict:
    cell = resolve_cell(cell_ref)
    schedule = build_schedule(scenario, variant, cell=cell)
    result = run_lifetime(cell, schedule, mode=mode, jump_tol=jump_tol)
    run_dir = Path(out_dir) / f"{cell.name}__{scenario}__{variant}"
    run_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory(result, run_dir / "trajectory.csv")
    write_summary(result, run_dir / "summary.json", cell)
    with open(run_dir / "summary.json") as fh:
        return json.load(fh)


def cmd_simulate(args) -> int:
    if not args.cells or not args.scenarios:
        print("error: need at least one cell and one scenario", file=sys.stderr)
        return 2
    try:
        scenarios = [Scenario(s).value for s in args.scenarios]
        variants = [DriveVariant(v).value for v in args.drive]
        for ref in args.cells:
            resolve_cell(ref)
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    grid = [(c, s, v) for c in args.cells for s in scenarios for v in variants]
    summaries = {}
    failures = {}
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futs = {pool.submit(_run_one, c, s, v, args.mode, args.out,
                                args.tol_jump): (c, s, v) for c, s, v in grid}
            for fut in concurrent.futures.as_completed(futs):
                key = futs[fut]
                try:
                    summaries[key] = fut.result()
                except CellwearError as exc:
                    failures[key] = str(exc)
    else:
        for key in grid:
            try:
                summaries[key] = _run_one(*key, args.mode, args.out, args.tol_jump)
            except CellwearError as exc:
                failures[key] = str(exc)

    _print_summary_table(summaries)
    for key, msg in sorted(failures.items()):
        print(f"FAILED {key}: {msg}", file=sys.stderr)
    return 1 if failures else 0


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.1f}"
    return str(value)


def _print_summary_table(summaries: dict):
    if not summaries:
        return
    keys = sorted(summaries)
    headers = [f"{c.split('/')[-1].removesuffix('.yaml')}|{s}|{v}" for c, s, v in keys]
    width = max(len(h) for h in headers) + 2
    print("".ljust(22) + "".join(h.rjust(width) for h in headers))
    for field, label in SUMMARY_ROWS:
        row = [_fmt(summaries[k].get(field)) for k in keys]
        print(label.ljust(22) + "".join(v.rjust(width) for v in row))


def cmd_fit(args) -> int:
    try:
        cell = resolve_cell(args.cell)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ds_dir = Path(args.datasets)
    files = sorted(ds_dir.glob("*.txt")) + sorted(ds_dir.glob("*.csv"))
    if not files:
        print(f"error: no dataset files in {ds_dir}", file=sys.stderr)
        return 2
    try:
        datasets = [load_dataset(f) for f in files]
        report = fit_pipeline(datasets, cell,
                              budget_calendar=args.budget,
                              budget_cycling=args.budget)
    except CellwearError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fitted = report.cell
    doc = {
        "cell": fitted.name,
        "stages": [
            {
                "stage": st.stage,
                "fitted": {k: float(v) for k, v in st.fitted.items()},
                "residual_norm": st.residual_norm,
                "n_evals": st.n_evals,
                "flag": st.flag,
                "verification_delta": st.verification_delta,
                "dissolution_enabled": st.dissolution_enabled,
            }
            for st in report.stages
        ],
    }
    with open(out / "fit_report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_fitted_yaml(fitted, out / f"{fitted.name}_fitted.yaml")
    for st in report.stages:
        print(f"{st.stage}: norm={st.residual_norm:.5f} evals={st.n_evals} "
              f"flag={st.flag} verify_delta={st.verification_delta:.5f}")
    return 0


def _write_fitted_yaml(cell, path):
    doc = {
        "name": cell.name,
        "fitted_parameters": {
            "k_sei_m_per_s": float(cell.sei.k_sei),
            "d_sei_m2_per_s": float(cell.sei.d_sei),
            "i0_diss_a_per_m2": float(cell.dissolution.i_0_diss),
            "k0_pl_m_per_s": float(cell.plating.k_0_pl),
            "beta_pos_per_s": float(cell.crack.beta_pos),
            "beta_neg_per_s": float(cell.crack.beta_neg),
            "m_crack": float(cell.crack.m_crack),
        },
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


def cmd_tvd(args) -> int:
    root = Path(args.results)
    summaries = []
    for f in sorted(root.glob("*/summary.json")):
        with open(f) as fh:
            summaries.append(json.load(fh))
    if not summaries:
        print(f"error: no summary.json files under {root}", file=sys.stderr)
        return 2
    baselines = {(s["cell"], s["drive_variant"]): s for s in summaries
                 if s["scenario"] == "no_v2g"}
    v2g_runs = [s for s in summaries if s["scenario"] != "no_v2g"]
    if not v2g_runs:
        print("error: no V2G runs found", file=sys.stderr)
        return 2
    pairs = []
    unmatched = []
    for s in v2g_runs:
        base = baselines.get((s["cell"], s["drive_variant"]))
        if base is None or base["termination"]["censored"] or s["termination"]["censored"]:
            unmatched.append((s["cell"], s["scenario"], s["drive_variant"]))
            continue
        pairs.append((base, s))
    if not pairs:
        for item in unmatched:
            print(f"unmatched: {item}", file=sys.stderr)
        print("error: no baseline/V2G pairs matched", file=sys.stderr)
        return 1

    records = []
    points = []
    for base, s in pairs:
        t = tvd_from_numbers(base["days"], base["norm_throughput_ah"],
                             s["days"], s["norm_throughput_ah"],
                             cell_name=s["cell"], scenario=s["scenario"],
                             drive_variant=s["drive_variant"])
        bd = breakdown_from_fractions(
            s["lli_sei_pct"] / 100.0, s["lli_plating_pct"] / 100.0,
            s["lli_diss_pct"] / 100.0, s["lli_crack_pct"] / 100.0,
            s["lli_pct"] / 100.0)
        records.append({
            "cell": s["cell"], "scenario": s["scenario"],
            "drive_variant": s["drive_variant"],
            "gain_frac": t.gain_frac, "loss_frac": t.loss_frac,
            "kind": t.kind.value,
            "tvd": None if not math.isfinite(t.value) else t.value,
            "cal_fraction": bd.cal_fraction,
        })
        points.append(TrendPoint(s["cell"], s["scenario"], s["drive_variant"],
                                 bd.cal_fraction, t))
    trend = trend_report(points)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tvd_report.json", "w") as fh:
        json.dump({
            "pairs": sorted(records, key=lambda r: (r["cell"], r["scenario"],
                                                    r["drive_variant"])),
            "unmatched": sorted(unmatched),
            "trend": {
                "slope": trend.slope, "intercept": trend.intercept,
                "spearman": trend.spearman, "monotone": trend.monotone,
                "degenerate": trend.degenerate,
            },
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "trend.csv", "w") as fh:
        fh.write("family,scenario,variant,cal_fraction,tvd,log10_tvd\n")
        for p in sorted(points, key=lambda p: (p.cell_name, p.scenario,
                                               p.drive_variant)):
            tval = p.tvd.value
            tstr = f"{tval:.6f}" if math.isfinite(tval) else p.tvd.kind.value
            lstr = f"{p.tvd.log10:.6f}" if p.tvd.log10 is not None else ""
            fh.write(f"{p.cell_name},{p.scenario},{p.drive_variant},"
                     f"{p.cal_fraction:.6f},{tstr},{lstr}\n")
    for item in unmatched:
        print(f"unmatched: {item}", file=sys.stderr)
    print(f"wrote {out / 'tvd_report.json'} ({len(records)} pairs)")
    return 0


def cmd_validate(args) -> int:
    """Fast self-checks on the bundled data (schedule anchors, arithmetic)."""
    failures = []

    def check(name, ok, detail=""):
        print(f"  {'PASS' if ok else 'FAIL'}  {name}  {detail}")
        if not ok:
            failures.append(name)

    profile = bundled_drive_profile("long")
    check("drive profile net consumption",
          0.25 <= profile.net_soc <= 0.28, f"{profile.net_soc:.3f} SOC/h")
    cell = resolve_cell(args.cell)
    anchors = {"no_v2g": 0.79, "v2g_moderate": 0.79, "v2g_early": 0.88,
               "v2g_late": 0.61}
    for scen, target in anchors.items():
        sched = build_schedule(scen, "long", cell=cell)
        check(f"{scen} first-cycle SOC_ave",
              abs(sched.soc_ave_ideal - target) <= 0.01,
              f"{sched.soc_ave_ideal:.3f} vs {target}")
    t = tvd_from_numbers(371.0, 390.3, 221.0, 453.5)
    check("TvD arithmetic fixture", abs(t.value - 0.4005) < 0.01, f"{t.value:.3f}")
    bd = breakdown_from_fractions(0.232, 0.006, 0.044, 0.017, 0.299)
    check("ledger closure fixture", abs(bd.lli_total - 0.299) < 1e-12)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellwear",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cellwear {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run lifetime simulations")
    sim.add_argument("--cells", nargs="+", required=True,
                     help="bundled family names or parameter-file paths")
    sim.add_argument("--scenarios", nargs="+", required=True,
                     help="no_v2g v2g_moderate v2g_early v2g_late")
    sim.add_argument("--drive", nargs="+", default=["long"],
                     help="drive variants: long short")
    sim.add_argument("--mode", choices=["accelerated", "exhaustive"],
                     default="accelerated")
    sim.add_argument("--out", default="runs")
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--tol-jump", type=float, default=DEFAULT_JUMP_TOL,
                     help="capacity change allowed per extrapolation jump "
                          "(fraction of nominal)")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="calibrate degradation parameters")
    fit.add_argument("--datasets", required=True,
                     help="directory of aging dataset files")
    fit.add_argument("--cell", required=True)
    fit.add_argument("--out", default="fit")
    fit.add_argument("--budget", type=int, default=None,
                     help="residual evaluations per stage")
    fit.set_defaults(func=cmd_fit)

    tvd_p = sub.add_parser("tvd", help="TvD report from simulation outputs")
    tvd_p.add_argument("--results", required=True,
                       help="directory holding per-run output directories")
    tvd_p.add_argument("--out", default="tvd")
    tvd_p.set_defaults(func=cmd_tvd)

    val = sub.add_parser("validate", help="self-checks on bundled fixtures")
    val.add_argument("--cell", default="nmc111")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CellwearError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
