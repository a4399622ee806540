"""Command-line entry point: `coexbandit {run,sweep,bounds,sim-calibrate,schema}`."""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .experiments import SCENARIOS, bound_report, run_plan
from .output import read_csv, write_csv, write_events
from .packet_sim import SimConfig, calibrate

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse from printing usage and exiting on its own
        raise UsageError(message)


def _diagnose(code: int, kind: str, message: str, path: str | None = None) -> int:
    doc = {"exit": code, "kind": kind, "message": message}
    if path:
        doc["path"] = path
    print(json.dumps(doc), file=sys.stderr)
    return code


def _load(args) -> RunConfig:
    if args.config:
        try:
            cfg = cfgmod.load(args.config)
        except FileNotFoundError:
            raise ConfigError("", f"config file not found: {args.config}") from None
    else:
        cfg = cfgmod.default_config(args.scenario)
    if getattr(args, "out", None):
        cfg.output = replace(cfg.output, dir=args.out)
    return cfg


def _emit(cfg: RunConfig, plan, name: str, workers: int) -> dict:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_plan(plan, workers=workers)
    csv_path = out / f"{name}.csv"
    write_csv(records, csv_path)
    info = {"csv": str(csv_path), "rows": sum(len(r) for r in records), "plan_hash": cfgmod.plan_hash(plan)}
    if cfg.output.events:
        ev_path = out / f"{name}.events.ndjson"
        write_events(records, ev_path)
        info["events"] = str(ev_path)
    return info


def cmd_run(args) -> int:
    cfg = _load(args)
    print(json.dumps(_emit(cfg, cfg.plan, cfg.output.prefix, args.workers)))
    return EXIT_OK


def _tag(x: float) -> str:
    return f"{x:g}".replace(".", "p").replace("-", "m")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    plan = cfg.plan
    omegas = cfg.sweep.omega or [plan.learner.omega]
    exps = cfg.sweep.exponent or [plan.learner.exponent]
    ns = cfg.sweep.n or [plan.environment.n]
    span = plan.learner.upper - plan.learner.lower
    for w in omegas:
        if not 0 < w <= span / 2:
            raise ConfigError("sweep.omega", f"{w} outside (0, {span / 2}]")
    for n in ns:
        if n < 1:
            raise ConfigError("sweep.n", "must be >= 1")
    for w, p, n in itertools.product(omegas, exps, ns):
        sub = replace(plan, learner=replace(plan.learner, omega=w, exponent=p),
                      environment=replace(plan.environment, n=n))
        name = f"{cfg.output.prefix}_omega{_tag(w)}_p{_tag(p)}_n{n}"
        print(json.dumps(_emit(cfg, sub, name, args.workers)))
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = _load(args)
    plan = cfg.plan
    if not plan.learner.constant:
        raise ConfigError("learner.constant", "the bounds assume constant eta and delta; set it to true")
    rows = read_csv(args.csv)
    half = plan.iterations // 2
    final, middle = {}, {}
    for r in rows:
        if r["k"] == plan.iterations:
            final[r["run_id"]] = r["regret_so_far"]
        if r["k"] == half:
            middle[r["run_id"]] = r["regret_so_far"]
    if not final or set(final) != set(middle):
        raise ConfigError("iterations", f"{args.csv} has no complete runs of {plan.iterations} iterations")
    if any(math.isnan(v) for v in final.values()):
        raise ConfigError("track_regret", "regret column is empty; rerun with track_regret: true")
    ids = sorted(final)
    rep = bound_report(plan, [final[i] for i in ids], [middle[i] for i in ids])
    print(f"runs            {len(ids)}")
    print(f"T               {rep.T}")
    print(f"D G C L         {rep.D:.6g} {rep.G:.6g} {rep.C:.6g} {rep.L:.6g}")
    print(f"eta delta       {rep.eta:.6g} {rep.delta:.6g}")
    print(f"R_T             {rep.mean_regret:.6g} +- {rep.stderr:.3g}")
    print(f"R_T/2           {float(np.mean(rep.regret_half)):.6g}")
    print(f"theorem1_bound  {rep.theorem1:.6g}")
    print(f"corollary_bound {rep.corollary:.6g}")
    print(f"within_bound    {str(rep.mean_regret <= rep.theorem1).lower()}")
    print(f"sublinear       {str(rep.sublinear).lower()}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.batch <= 0 or args.replications < 1:
        raise ConfigError("batch" if args.batch <= 0 else "replications", "must be positive")
    base = SimConfig(t_b=args.batch)
    rows = calibrate(args.n, [t / 1e3 for t in args.toff_ms], base, seed=args.seed, replications=args.replications)
    print(f"{'n':>3} {'toff_ms':>8} {'lte_sim':>12} {'lte_model':>12} {'err':>7} "
          f"{'wifi_sim':>12} {'wifi_model':>12} {'err':>7} {'worst':>7} ok")
    for r in rows:
        print(f"{r.n:>3} {r.toff_ms:>8.1f} {r.lte_sim:>12.5g} {r.lte_model:>12.5g} {r.lte_error:>7.2%} "
              f"{r.wifi_sim:>12.5g} {r.wifi_model:>12.5g} {r.wifi_error:>7.2%} {r.wifi_worst_station:>7.2%} "
              f"{'yes' if r.passes(args.tol) else 'no'}")
    return EXIT_OK


def cmd_schema(args) -> int:
    if args.example:
        sys.stdout.write(cfgmod.dumps(cfgmod.default_config(args.example)))
    else:
        sys.stdout.write(cfgmod.reference())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coexbandit", description="Bandit tuning of LTE/WiFi duty cycles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--scenario", choices=SCENARIOS, help="preset used when no --config is given")
        sp.add_argument("--out", help="override output.dir")
        sp.add_argument("--workers", type=int, default=1, help="parallel replications")

    sp = sub.add_parser("run", help="execute one plan and write its trajectory CSV")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="cross-product of sweep.omega x sweep.exponent x sweep.n")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bounds", help="measured regret of a finished run next to the theoretical bounds")
    sp.add_argument("csv", help="trajectory CSV written by `run`")
    sp.add_argument("--config", required=True, help="the configuration that produced the CSV")
    sp.set_defaults(func=cmd_bounds, scenario=None)

    sp = sub.add_parser("sim-calibrate", help="packet simulator vs analytic throughputs")
    sp.add_argument("--n", type=int, nargs="+", default=[1, 5, 10])
    sp.add_argument("--toff-ms", type=float, nargs="+", default=[50.0, 200.0, 500.0])
    sp.add_argument("--batch", type=float, default=50.0, help="simulated seconds per batch")
    sp.add_argument("--replications", type=int, default=1, help="batches averaged per cell")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=0.05)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("schema", help="print the configuration reference")
    sp.add_argument("--example", choices=SCENARIOS, help="print a complete YAML config for a preset instead")
    sp.set_defaults(func=cmd_schema)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _diagnose(EXIT_CONFIG, "usage", str(exc))
    try:
        return args.func(args)
    except ConfigError as exc:
        return _diagnose(EXIT_CONFIG, "config", exc.message, exc.path)
    except OSError as exc:
        return _diagnose(EXIT_RUNTIME, "io", str(exc))
    except Exception as exc:  # noqa: BLE001 - every failure must end in a diagnostic line
        return _diagnose(EXIT_RUNTIME, "runtime", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
