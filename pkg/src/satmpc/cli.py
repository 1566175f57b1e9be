"""Command-line surface tying the pipeline together.

Subcommands:

  schedule      emit the SAT-cycling identification plan
  simulate      run closed-loop days (default, lbmpc, or the cycling
                experiment) and write one trace CSV per day
  identify      fit the zone model from an experiment trace
  control-step  run one planning cycle from a JSON state file
  compare       bootstrap comparison of two trace directories

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from datetime import timedelta

import numpy as np

from . import plant as plant_mod
from .config import RunConfig, default_run_config, load_config
from .evaluation import (
    SupportError,
    characteristic_csv,
    compare_controllers,
    kernel_regression,
    records_from_traces,
)
from .planner import Corrections, plan, predict_one_step
from .qp import QpError
from .sysid import ConditioningWarning, experiment_schedule
from .thermal import HybridModel, ZoneState
from .timebase import format_ts, parse_ts
from .traces import TraceError, TraceSet

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _load_run_config(path):
    return load_config(path) if path else default_run_config()


def _parse_sats(text):
    return np.array([float(v) for v in text.split(",")])


def cmd_schedule(args):
    cfg = _load_run_config(args.config)
    sats = _parse_sats(args.sats) if args.sats else cfg.control_sats
    dwell = timedelta(minutes=args.dwell_minutes or cfg.dwell_minutes)
    start = parse_ts(args.start) if args.start else None
    sched = experiment_schedule(sats, dwell=dwell, start=start)
    doc = {
        "commands": [{"time": format_ts(t), "sat": s} for t, s in sched.commands],
        "dwell_minutes": int(dwell.total_seconds() // 60),
        "samples_needed": sched.samples_needed,
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
    for entry in doc["commands"]:
        print(f"{entry['time']}  SAT -> {entry['sat']:.1f} F")
    print(f"log {sched.samples_needed} samples (one past the final dwell)")
    return EXIT_OK


def _write_model(path, model, doc, manifest, warnings_seen):
    out = {"manifest": manifest, **doc, "warnings": warnings_seen}
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)


def _read_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    return HybridModel.from_dict(doc)


def cmd_identify(args):
    import warnings as _warnings

    cfg = _load_run_config(args.config)
    trace = TraceSet.read_csv(args.trace)
    sched = cfg.schedule(start=trace.start)
    seen = []
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always", ConditioningWarning)
        model, doc = plant_mod.identify_from_trace(
            trace, sched, prior=cfg.prior, chain=args.chain or cfg.chain
        )
        seen = [str(w.message) for w in caught if issubclass(w.category, ConditioningWarning)]
    manifest = cfg.manifest(command="identify", trace=os.path.basename(args.trace))
    _write_model(args.out, model, doc, manifest, seen)
    rms = ", ".join(f"{v:.4f}" for v in doc["residual_rms"])
    print(f"identified {model.n_zones} zones x {model.n_modes} modes -> {args.out}")
    print(f"residual rms per zone (F): {rms}")
    for msg in seen:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_OK


def _day_plant(cfg, tag, day):
    n = cfg.n_zones
    if tag == "experiment":
        sched = cfg.schedule()
        oat, q = plant_mod.identification_inputs(n, sched, seed=[cfg.seed, 2, day])
        return plant_mod.Plant(cfg.plant, oat, q, seed=[cfg.seed, 3, day]), sched
    code = 0 if tag == "default" else 1
    oat, q = plant_mod.reference_day_inputs(n, [cfg.seed, code, day], horizon=cfg.horizon)
    return plant_mod.Plant(cfg.plant, oat, q, seed=[cfg.seed, code + 10, day]), None


def cmd_simulate(args):
    cfg = _load_run_config(args.config)
    os.makedirs(args.out_dir, exist_ok=True)
    days = int(args.days)
    if days < 0:
        raise ValueError("days must be >= 0")
    model = None
    if args.controller == "lbmpc":
        if not args.model:
            raise ValueError("--model is required for the lbmpc controller")
        model = _read_model(args.model)
    if model is not None and model.n_zones != cfg.n_zones:
        raise ValueError(f"model covers {model.n_zones} zones, config has {cfg.n_zones}")
    written = []
    for day in range(days):
        plant, sched = _day_plant(cfg, args.controller, day)
        start = plant_mod.REFERENCE_START + timedelta(days=day)
        manifest = cfg.manifest(command="simulate", controller=args.controller, day=day)
        if args.controller == "default":
            sat = None if args.base_sat is None else float(args.base_sat)
            trace = plant_mod.default_controller(plant, sat=sat, start=start, manifest=manifest)
        elif args.controller == "lbmpc":
            trace = plant_mod.lbmpc_controller(
                plant, model, weights=cfg.cost_weights(), horizon=cfg.horizon,
                start=start, manifest=manifest,
            )
        else:
            trace = plant_mod.run_identification_experiment(
                plant, sched, start=start, manifest=manifest
            )
        path = os.path.join(args.out_dir, f"{args.controller}_day{day:02d}.csv")
        trace.write_csv(path)
        written.append(path)
        print(f"{path}: {trace.n_steps} steps, {trace.total_energy:.1f} kWh")
    if not written:
        print("no days requested; nothing written")
    return EXIT_OK


def cmd_control_step(args):
    cfg = _load_run_config(args.config)
    model = _read_model(args.model)
    with open(args.state) as fh:
        state = json.load(fh)
    measured = [ZoneState(temp=t, flow=f, reheat=r) for t, f, r in state["measured"]]
    corrections = (
        Corrections.from_dict(state["corrections"])
        if state.get("corrections")
        else Corrections.zeros(model.n_zones)
    )
    oat = np.asarray(state["oat_forecast"], dtype=float)
    pin = state.get("committed_mode") if state.get("hold_hour") else None
    result = plan(
        model, list(cfg.plant.vav), corrections,
        np.array([zs.temp for zs in measured]),
        oat, weights=cfg.cost_weights(), horizon=min(cfg.horizon, oat.shape[0]),
        pin_first_mode=pin,
    )
    predicted = predict_one_step(model, list(cfg.plant.vav), measured, result.best_sequence.blocks[0])
    state_out = {
        "corrections": corrections.to_dict(),
        "measured": state["measured"],
        "predicted": [[zs.temp, zs.flow, zs.reheat] for zs in predicted],
        "committed_mode": result.best_sequence.blocks[0],
        "oat_forecast": oat.tolist(),
        "sat_command": result.sat_command,
        "feasible": result.feasible,
        "cost": result.best_cost,
    }
    out_path = args.out or args.state
    with open(out_path, "w") as fh:
        json.dump(state_out, fh, indent=2)
    flag = "feasible" if result.feasible else "INFEASIBLE (least-violation fallback)"
    print(f"SAT command: {result.sat_command:.1f} F  blocks {result.best_sequence.blocks}  "
          f"cost {result.best_cost:.4g}  {flag}")
    return EXIT_OK


def _collect_traces(pattern):
    if os.path.isdir(pattern):
        paths = sorted(glob.glob(os.path.join(pattern, "*.csv")))
    else:
        paths = sorted(glob.glob(pattern))
    if not paths:
        raise ValueError(f"no trace CSVs match {pattern!r}")
    return [TraceSet.read_csv(p) for p in paths]


def cmd_compare(args):
    traces_a = _collect_traces(args.a)
    traces_b = _collect_traces(args.b)
    records_a = records_from_traces(traces_a)
    records_b = records_from_traces(traces_b)
    report = compare_controllers(
        records_a, records_b, resamples=args.resamples, seed=args.seed
    )
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    if args.plots_dir:
        os.makedirs(args.plots_dir, exist_ok=True)
        for tag, records in (("a", records_a), ("b", records_b)):
            for stat in ("energy", "comfort"):
                x = np.array([r.oat for r in records])
                y = np.array([getattr(r, stat) for r in records])
                characteristic_csv(
                    kernel_regression(x, y),
                    os.path.join(args.plots_dir, f"{stat}_{tag}.csv"),
                )
    e, c = report.energy, report.comfort
    print(f"energy:  delta = {e.delta:+.1f} kWh/day  p = {e.p_value:.4f}  "
          f"CI [{e.ci_low:.1f}, {e.ci_high:.1f}]")
    print(f"comfort: delta = {c.delta:+.4f} F-h/day  p = {c.p_value:.4f}  "
          f"CI [{c.ci_low:.4f}, {c.ci_high:.4f}]")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="satmpc",
        description="Supply-air-temperature learning MPC: identify, simulate, compare.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="emit the SAT-cycling identification plan")
    p.add_argument("--config", help="RunConfig JSON/TOML")
    p.add_argument("--sats", help="comma-separated mode SATs, overrides config")
    p.add_argument("--dwell-minutes", type=int, help="dwell per mode")
    p.add_argument("--start", help="ISO-8601 UTC start (default: today midnight UTC)")
    p.add_argument("--out", help="write the plan as JSON")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("identify", help="fit the zone model from an experiment trace")
    p.add_argument("--trace", required=True, help="experiment trace CSV")
    p.add_argument("--config", help="RunConfig JSON/TOML")
    p.add_argument("--chain", choices=["verbatim", "flipped"], help="flow-gain ordering direction")
    p.add_argument("--out", default="model.json", help="model output path")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("simulate", help="run closed-loop days on the simulated plant")
    p.add_argument("--controller", required=True, choices=["default", "lbmpc", "experiment"])
    p.add_argument("--days", default=1, help="number of simulated days (one trace per day)")
    p.add_argument("--config", help="RunConfig JSON/TOML")
    p.add_argument("--model", help="model JSON (required for lbmpc)")
    p.add_argument("--base-sat", help="constant SAT for the default controller")
    p.add_argument("--out-dir", required=True, help="directory for per-day trace CSVs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("control-step", help="one planning cycle from a JSON state file")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--state", required=True, help="state JSON (measured, corrections, forecast)")
    p.add_argument("--config", help="RunConfig JSON/TOML")
    p.add_argument("--out", help="updated state path (default: overwrite input)")
    p.set_defaults(func=cmd_control_step)

    p = sub.add_parser("compare", help="bootstrap comparison of two trace sets")
    p.add_argument("--a", required=True, help="baseline traces: directory or glob")
    p.add_argument("--b", required=True, help="candidate traces: directory or glob")
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--plots-dir", help="write plot-ready characteristic CSVs here")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TraceError, SupportError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
