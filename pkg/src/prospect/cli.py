"""``prospect`` command line: gen, plan, simulate, bench, compare.

Exit codes: 0 success, 2 infeasible, 3 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import SizeError, global_enumeration_oracle, margin_planner, simulated_annealing_planner
from .instance import (Instance, InvalidInput, Plan, Point3, check_feasibility, dump_json,
                       load_instance)
from .planner import Infeasible, PlannerRequest, expected_mission_time, solve
from .replanner import ReplanConfig
from .simulator import NoiseModel, monte_carlo, trial_seed
from .travel import TravelModel, UniformEdgeModel, model_from_dict

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 2, 3

REPORT_COLUMNS = ("instance", "method", "n", "p_r", "trials", "p_hat", "mean_time", "std_time",
                  "mean_tours", "planned_tours", "planned_time", "replan_events", "wall_time")
BENCH_COLUMNS = ("n", "instances", "mean_wall_time", "max_wall_time", "mean_tours", "mean_planned_time")

DEFAULTS = {
    "n": 10, "count": 10, "env": [4000.0, 4000.0], "z": 100.0, "start": [0.0, 0.0, 0.0],
    "final": [4000.0, 4000.0, 0.0], "budget": 600.0, "gamma": 1.0, "risk": None,
    "trials": 1000, "parallel": 1, "workers": 1, "horizon": 2, "closed_loop": False,
    "sizes": [10, 20, 30, 40], "methods": ["prospect", "margin", "sa", "oracle"],
    "sa_steps": 50000, "sa_tmax": 1000.0, "sa_tmin": 0.01, "model": None, "instances": [],
    "out": None, "csv": None, "json": None, "figures": None, "no_timing": False,
    "mid_tour": True, "between_tours": True,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -- config plumbing ---------------------------------------------------------

def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise InvalidInput(f"cannot read config {path}: {exc.strerror}") from exc
    if not isinstance(cfg, dict):
        raise InvalidInput(f"{path}: config must be a JSON object")
    return cfg


def _resolve(args: argparse.Namespace, cfg: dict) -> argparse.Namespace:
    """Flags win over config values, config values over built-in defaults."""
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) in (None, []):
            setattr(args, key, cfg.get(key, default))
    return args


def _seed(args, cfg, required: bool) -> int:
    for v in (args.seed, cfg.get("seed"), os.environ.get("PROSPECT_SEED")):
        if v is not None and v != "":
            try:
                return int(v)
            except ValueError as exc:
                raise InvalidInput(f"seed must be an integer, got {v!r}") from exc
    if required:
        raise UsageError("a seed is required: pass --seed, set it in --config or export PROSPECT_SEED")
    return 0


def _model(source) -> TravelModel:
    if source is None:
        return UniformEdgeModel()
    if isinstance(source, dict):
        return model_from_dict(source)
    return model_from_dict(_load_config(source))


def _instance(path, risk) -> Instance:
    try:
        inst = load_instance(path)
    except OSError as exc:
        raise InvalidInput(f"cannot read instance {path}: {exc.strerror}") from exc
    return inst.with_risk(float(risk)) if risk is not None else inst


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _write_reports(rows, columns, args, extra: dict | None = None) -> None:
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in columns})
    if args.json:
        Path(args.json).parent.mkdir(parents=True, exist_ok=True)
        doc = {"columns": list(columns), "rows": [{k: _clean(r[k]) for k in columns} for r in rows]}
        doc.update(extra or {})
        dump_json(doc, args.json)


def read_csv_report(path) -> list[dict]:
    """Parse a report CSV back into typed rows (``nan`` becomes ``None``)."""
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                if k in ("instance", "method"):
                    row[k] = v
                elif k in ("n", "trials", "replan_events", "planned_tours", "instances"):
                    row[k] = int(v)
                else:
                    row[k] = _clean(float(v))
            out.append(row)
    return out


# -- generation ----------------------------------------------------------------

def generate_instance(n: int, seed: int, index: int, env=(4000.0, 4000.0), z: float = 100.0,
                      start=(0.0, 0.0, 0.0), final=(4000.0, 4000.0, 0.0), budget: float = 600.0,
                      gamma: float = 1.0, risk: float = 0.1) -> Instance:
    """Points uniform in the x-y box at a fixed altitude; one generator per
    ``(seed, index)`` so any file can be regenerated alone."""
    if n < 1:
        raise UsageError("n must be at least 1")
    rng = np.random.default_rng(trial_seed(seed, index))
    xy = rng.uniform(0.0, 1.0, size=(n, 2)) * np.asarray(env, dtype=float)
    pts = tuple(Point3(float(x), float(y), float(z)) for x, y in xy)
    bounds = (float(env[0]), float(env[1]), float(z))
    return Instance(bounds, pts, Point3(*start), Point3(*final), float(budget), float(risk), float(gamma))


def cmd_gen(args, cfg) -> int:
    seed = _seed(args, cfg, required=False)
    out = Path(args.out or "instances")
    out.mkdir(parents=True, exist_ok=True)
    risk = 0.1 if args.risk is None else float(args.risk)
    for k in range(int(args.count)):
        inst = generate_instance(int(args.n), seed, k, args.env, float(args.z), args.start,
                                 args.final, float(args.budget), float(args.gamma), risk)
        path = out / f"n{int(args.n):03d}_{k:03d}.json"
        dump_json(inst.to_dict(), path)
        print(path)
    return EXIT_OK


# -- plan ----------------------------------------------------------------------

def cmd_plan(args, cfg) -> int:
    seed = _seed(args, cfg, required=False)
    model = _model(args.model)
    inst = _instance(args.instance, args.risk)
    res = solve(PlannerRequest.offline(inst, model, seed), workers=int(args.workers))
    diag = res.diagnostics(timing=not args.no_timing)
    diag["instance"] = str(args.instance)
    if res.plan is None:
        print(json.dumps(diag, indent=1))
        print("infeasible: no partition meets the risk bound; some point cannot be served "
              "within the flight budget even as a single tour", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = check_feasibility(res.plan, inst, model)
    if not report.ok:
        raise RuntimeError("planner produced an infeasible plan: " + "; ".join(report.messages))
    diag["expected_mission_time"] = expected_mission_time(res.plan, inst, model)
    out = Path(args.out or Path(args.instance).with_suffix(".plan.json"))
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_json(res.plan.to_dict(), out)
    dump_json(diag, out.with_suffix(".diag.json"))
    print(json.dumps(diag, indent=1))
    if args.figures:
        from .plotting import plot_plan
        plot_plan(res.plan, inst, Path(args.figures) / f"{out.stem}.png")
    return EXIT_OK


# -- simulate / compare --------------------------------------------------------

def _row(name, method, inst, plan, rep, model, wall, timing) -> dict:
    return {"instance": name, "method": method, "n": inst.n, "p_r": inst.risk_level,
            "trials": rep.trials, "p_hat": rep.p_hat, "mean_time": rep.mean_success_time,
            "std_time": rep.std_success_time, "mean_tours": rep.mean_tours,
            "planned_tours": plan.m, "planned_time": expected_mission_time(plan, inst, model),
            "replan_events": rep.replan_events, "wall_time": wall if timing else 0.0}


def _instances(args) -> list[str]:
    paths = list(args.instances)
    if not paths:
        raise UsageError("no instance files given")
    return paths


def _replan_config(args, seed) -> ReplanConfig | None:
    if not args.closed_loop:
        return None
    return ReplanConfig(int(args.horizon), bool(args.mid_tour), bool(args.between_tours), seed)


def cmd_simulate(args, cfg) -> int:
    seed = _seed(args, cfg, required=True)
    model = _model(args.model)
    noise = NoiseModel.from_model(model)
    replan = _replan_config(args, seed)
    rows, plans, status = [], {}, EXIT_OK
    for idx, path in enumerate(_instances(args)):
        name = Path(path).stem
        try:
            inst = _instance(path, args.risk)
            t0 = time.perf_counter()
            res = solve(PlannerRequest.offline(inst, model, seed))
            wall = time.perf_counter() - t0
            if res.plan is None:
                raise Infeasible("no partition meets the risk bound")
        except InvalidInput as exc:
            print(f"{path}: input error: {exc}", file=sys.stderr)
            status = max(status, EXIT_INPUT)
            continue
        except Infeasible as exc:
            print(f"{path}: infeasible: {exc}", file=sys.stderr)
            status = max(status, EXIT_INFEASIBLE)
            continue
        rep = monte_carlo(res.plan, inst, noise, int(args.trials), trial_seed(seed, idx),
                          parallelism=int(args.parallel), model=model, closed_loop=replan)
        method = "prospect-online" if replan else "prospect"
        rows.append(_row(name, method, inst, res.plan, rep, model, wall, not args.no_timing))
        plans[name] = (res.plan, inst)
        print(f"{name}\t{method}\tp_hat={rep.p_hat:.4f}\ttours={rep.mean_tours:.2f}")
    _write_reports(rows, REPORT_COLUMNS, args, {"seed": seed, "trials": int(args.trials)})
    if args.figures and rows:
        from .plotting import plot_failure_rates, plot_plan
        fig = Path(args.figures)
        plot_failure_rates(rows, fig / "failure_rates.png", rows[0]["p_r"])
        for name, (plan, inst) in plans.items():
            plot_plan(plan, inst, fig / f"{name}_plan.png")
    return status


def _run_method(method, inst, model, seed, args) -> Plan | None:
    if method == "prospect":
        res = solve(PlannerRequest.offline(inst, model, seed))
        if res.plan is None:
            raise Infeasible("no partition meets the risk bound")
        return res.plan
    if method == "margin":
        return margin_planner(inst, model, seed)
    if method == "sa":
        schedule = (float(args.sa_tmax), float(args.sa_tmin), int(args.sa_steps))
        return simulated_annealing_planner(inst, model, schedule, seed)
    if method == "oracle":
        plan, _ = global_enumeration_oracle(inst, model)
        if plan is None:
            raise Infeasible("no plan meets the risk bound")
        return plan
    raise UsageError(f"unknown method {method!r}")


def cmd_compare(args, cfg) -> int:
    seed = _seed(args, cfg, required=False)
    model = _model(args.model)
    noise = NoiseModel.from_model(model)
    methods = args.methods.split(",") if isinstance(args.methods, str) else list(args.methods)
    rows, status = [], EXIT_OK
    for idx, path in enumerate(_instances(args)):
        name = Path(path).stem
        try:
            inst = _instance(path, args.risk)
        except InvalidInput as exc:
            print(f"{path}: input error: {exc}", file=sys.stderr)
            status = max(status, EXIT_INPUT)
            continue
        for method in methods:
            t0 = time.perf_counter()
            try:
                plan = _run_method(method, inst, model, seed, args)
            except SizeError as exc:
                print(f"{name}/{method}: skipped: {exc}", file=sys.stderr)
                continue
            except Infeasible as exc:
                print(f"{name}/{method}: infeasible: {exc}", file=sys.stderr)
                status = max(status, EXIT_INFEASIBLE)
                continue
            wall = time.perf_counter() - t0
            rep = monte_carlo(plan, inst, noise, int(args.trials), trial_seed(seed, idx),
                              parallelism=int(args.parallel))
            rows.append(_row(name, method, inst, plan, rep, model, wall, not args.no_timing))
            print(f"{name}\t{method}\tp_hat={rep.p_hat:.4f}\tplanned_time={rows[-1]['planned_time']:.1f}")
    _write_reports(rows, REPORT_COLUMNS, args, {"seed": seed, "trials": int(args.trials)})
    if args.figures and rows:
        from .plotting import plot_failure_rates
        plot_failure_rates(rows, Path(args.figures) / "compare_failure_rates.png", rows[0]["p_r"])
    return status


# -- bench ---------------------------------------------------------------------

def fit_exponent(ns, times) -> float:
    """Slope of log(time) against log(n)."""
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(times, float)), 1)
    return float(slope)


def cmd_bench(args, cfg) -> int:
    seed = _seed(args, cfg, required=True)
    model = _model(args.model)
    risk = 0.1 if args.risk is None else float(args.risk)
    sizes = [int(s) for s in args.sizes]
    rows = []
    for n in sizes:
        walls, tours, times = [], [], []
        for k in range(int(args.count)):
            inst = generate_instance(n, seed, k, risk=risk)
            t0 = time.perf_counter()
            res = solve(PlannerRequest.offline(inst, model, seed), workers=int(args.workers))
            walls.append(time.perf_counter() - t0)
            if res.plan is not None:
                tours.append(res.plan.m)
                times.append(expected_mission_time(res.plan, inst, model))
        rows.append({"n": n, "instances": int(args.count), "mean_wall_time": float(np.mean(walls)),
                     "max_wall_time": float(np.max(walls)),
                     "mean_tours": float(np.mean(tours)) if tours else math.nan,
                     "mean_planned_time": float(np.mean(times)) if times else math.nan})
        print(f"n={n}\twall={rows[-1]['mean_wall_time']:.4f}s\ttours={rows[-1]['mean_tours']:.2f}")
    exponent = fit_exponent(sizes, [r["mean_wall_time"] for r in rows]) if len(sizes) > 1 else math.nan
    print(f"fitted exponent: {exponent:.3f}")
    _write_reports(rows, BENCH_COLUMNS, args, {"seed": seed, "exponent": _clean(exponent)})
    if args.figures and len(sizes) > 1:
        from .plotting import plot_scaling
        plot_scaling(sizes, [r["mean_wall_time"] for r in rows], exponent,
                     Path(args.figures) / "scaling.png")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="prospect", description="Chance-constrained UAV-UGV mission planner.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, reports=True):
        sp.add_argument("--config", help="JSON file of option values; flags take precedence")
        sp.add_argument("--seed", type=int, help="master seed (falls back to PROSPECT_SEED)")
        sp.add_argument("--model", help="travel-model JSON file (default: uniform edge model)")
        sp.add_argument("--risk", type=float, help="override the instance risk level")
        sp.add_argument("--no-timing", action="store_true", default=None,
                        help="write 0.0 for wall times so outputs are byte-stable")
        sp.add_argument("--figures", help="directory for PNG figures (off by default)")
        if reports:
            sp.add_argument("--csv", help="CSV report path")
            sp.add_argument("--json", help="JSON report path")

    g = sub.add_parser("gen", help="write random instance files")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--count", type=int)
    g.add_argument("--env", type=float, nargs=2, metavar=("X", "Y"))
    g.add_argument("--z", type=float, help="fixed altitude of the aerial points")
    g.add_argument("--start", type=float, nargs=3)
    g.add_argument("--final", type=float, nargs=3)
    g.add_argument("--budget", type=float, help="maximum flight time per tour")
    g.add_argument("--gamma", type=float, help="recharge ratio")
    g.add_argument("--risk", type=float)
    g.add_argument("--out", help="output directory")

    pl = sub.add_parser("plan", help="plan one instance")
    common(pl, reports=False)
    pl.add_argument("instance")
    pl.add_argument("--out", help="plan file (default: <instance>.plan.json)")
    pl.add_argument("--workers", type=int)

    s = sub.add_parser("simulate", help="Monte Carlo over instance files")
    common(s)
    s.add_argument("instances", nargs="*")
    s.add_argument("--trials", type=int)
    s.add_argument("--parallel", type=int)
    s.add_argument("--closed-loop", action="store_true", default=None)
    s.add_argument("--horizon", type=int)

    b = sub.add_parser("bench", help="planner wall-time scaling")
    common(b)
    b.add_argument("--sizes", type=int, nargs="+")
    b.add_argument("--count", type=int)
    b.add_argument("--workers", type=int)

    c = sub.add_parser("compare", help="compare planners on instance files")
    common(c)
    c.add_argument("instances", nargs="*")
    c.add_argument("--methods", help="comma list from prospect,margin,sa,oracle")
    c.add_argument("--trials", type=int)
    c.add_argument("--parallel", type=int)
    c.add_argument("--sa-steps", type=int)
    c.add_argument("--sa-tmax", type=float)
    c.add_argument("--sa-tmin", type=float)
    return p


COMMANDS = {"gen": cmd_gen, "plan": cmd_plan, "simulate": cmd_simulate, "bench": cmd_bench,
            "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(getattr(args, "config", None))
        _resolve(args, cfg)
        return COMMANDS[args.command](args, cfg)
    except (InvalidInput, UsageError) as exc:
        print(f"prospect {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as exc:
        print(f"prospect {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
