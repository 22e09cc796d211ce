"""Command-line front end.

    balstag generate --nodes grid:6x6 --trips 50 --seed 7 --out inst.json
    balstag solve --instance inst.json --variant integ --seeds 0..9 --out runs/
    balstag evaluate --instance inst.json --solution runs/solution_integ_s0.json
    balstag report runs/ --out report/
    balstag validate-vickrey --rho-grid 0.1:0.9:0.1 --n 100000
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .incremental import PropagationBudgetExceeded
from .instance import InstanceError, generate_synthetic, load_instance, save_instance
from .network import NetworkError, PiecewiseRecipe, Polynomial, parse_network_spec
from .oracle import BudgetExceeded, OracleGrid, solve_exhaustive
from .schedule import (
    SolutionError,
    check_solution,
    construct_schedule,
    evaluate,
    load_solution,
    save_solution,
    write_schedule_csv,
)
from .solvers import VARIANTS, ControlScenario, LnsParams, run_variant

EXIT_USAGE, EXIT_IO, EXIT_BUDGET = 2, 3, 4
METRIC_FIELDS = ["variant", "seed", "cost", "total_delay", "congestion_delay", "detour_delay",
                 "infeasibility", "alpha", "feasible", "runtime_s", "timed_out", "n_trips",
                 "control_fraction", "objective", "config_hash"]


class UsageError(Exception):
    pass


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_csv(path, fieldnames, rows, chash):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={chash}\n")
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def _read_csv(path):
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _fraction(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {v}")
    return v


def _seed_range(text):
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty seed range {text}")
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",")]


def _rho_grid(text):
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(n)]
    return [float(x) for x in text.split(",")]


# --------------------------------------------------------------------------
# generate

def cmd_generate(args) -> int:
    try:
        network = parse_network_spec(args.nodes, seed=args.seed)
    except (ValueError, NetworkError) as exc:
        raise UsageError(f"--nodes: {exc}") from None
    spec = Polynomial() if args.delay == "polynomial" else PiecewiseRecipe()
    inst = generate_synthetic(
        network, args.trips, arrival_profile=args.profile, sigma_fraction=args.sigma,
        deadline_policy=args.deadline, k=args.k, theta=args.theta, seed=args.seed,
        horizon=args.horizon, delay_spec=spec,
    )
    config = {k: v for k, v in vars(args).items() if k not in ("out", "func", "verbose")}
    save_instance(inst, args.out, meta={"config_hash": config_hash(config), "generator": config})
    ff = [t.shortest_free_flow for t in inst.trips]
    sig = [t.max_stagger for t in inst.trips]
    routes = [len(t.routes) for t in inst.trips]
    print(f"trips={inst.n_trips} nodes={len(network.nodes)} arcs={len(network.arcs)} "
          f"mean_free_flow_s={sum(ff) / len(ff):.3f} mean_max_stagger_s={sum(sig) / len(sig):.3f} "
          f"mean_routes={sum(routes) / len(routes):.2f}")
    return 0


# --------------------------------------------------------------------------
# solve

def _solve_one(job):
    inst_path, variant, seed, params_kw, scen_kw, out_dir, chash = job
    instance = load_instance(inst_path)
    scenario = ControlScenario(**scen_kw)
    instance = scenario.apply(instance)
    out = Path(out_dir)
    tag = f"{variant}_s{seed}"
    params = LnsParams(seed=seed, **params_kw)
    meta = {"config_hash": chash, "variant": variant, "seed": seed}
    if variant == "oracle":
        grid = OracleGrid(params.grid or 1.0)
        solution, cost = solve_exhaustive(instance, grid, params.alpha_initial, scope=scenario.scope)
        save_solution(solution, out / f"solution_{tag}.json", meta)
        metrics = {"variant": variant, **cost.to_dict(), "feasible": cost.feasible, "runtime_s": 0.0,
                   "seed": seed, "timed_out": False, "n_trips": instance.n_trips}
        return _finish_metrics(metrics, scenario, chash)
    res = run_variant(instance, variant, params, scenario)
    save_solution(res.solution, out / f"solution_{tag}.json", meta)
    with open(out / f"runlog_{tag}.jsonl", "w") as fh:
        fh.write(f"# config_hash={chash}\n")
        for rec in res.log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _write_csv(out / f"trips_{tag}.csv", ["trip", "route_index", "start_s", "stagger_s", "travel_delta_s",
                                          "arrival_delta_s", "controlled"], res.trip_deltas, chash)
    _write_csv(out / f"arcs_{tag}.csv", ["arc", "total_delay_s", "trips", "max_flow"], res.arc_delays, chash)
    write_schedule_csv(construct_schedule(instance, res.solution), out / f"schedule_{tag}.csv",
                       f"config_hash={chash}")
    return _finish_metrics(res.metrics, scenario, chash)


def _finish_metrics(metrics, scenario, chash):
    metrics = dict(metrics)
    metrics.update(control_fraction=scenario.control_fraction, objective=scenario.objective,
                   config_hash=chash)
    return {k: metrics.get(k) for k in METRIC_FIELDS}


def cmd_solve(args) -> int:
    if not Path(args.instance).exists():
        print(f"error: instance file not found: {args.instance}", file=sys.stderr)
        return EXIT_IO
    seeds = args.seeds if args.seeds is not None else [args.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params_kw = dict(pool_fraction=args.pool, sample_fraction=args.sample, max_cycles=args.cycles,
                     time_limit=args.time_limit, max_iterations=args.max_iterations, grid=args.grid,
                     multi_start=not args.single_start)
    if args.preset == "stag":
        params_kw.update(pool_fraction=0.5, sample_fraction=0.1, max_cycles=25)
    try:
        LnsParams(**params_kw)
        scen_kw = dict(control_fraction=args.control_fraction, objective=args.objective,
                       seed=args.control_seed)
        ControlScenario(**scen_kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = {"instance_sha256": hashlib.sha256(Path(args.instance).read_bytes()).hexdigest(),
              "variant": args.variant, "params": params_kw, "scenario": scen_kw}
    jobs = []
    for seed in seeds:
        chash = config_hash({**config, "seed": seed})
        jobs.append((args.instance, args.variant, seed, params_kw, scen_kw, str(out), chash))
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_solve_one, jobs))
    else:
        rows = [_solve_one(job) for job in jobs]
    metrics_path = out / "metrics.csv"
    new = not metrics_path.exists()
    with open(metrics_path, "a", newline="") as fh:
        if new:
            fh.write(f"# config_hash={config_hash(config)}\n")
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        if new:
            w.writeheader()
        for row in rows:
            w.writerow(row)
    for row in rows:
        flag = " TIMED-OUT" if row["timed_out"] else ""
        flag += "" if row["feasible"] else " INFEASIBLE"
        print(f"{row['variant']} seed={row['seed']} cost={row['cost']:.6f} "
              f"delay={row['total_delay']:.6f} infeasibility={row['infeasibility']:.6f}{flag}")
    return 0


# --------------------------------------------------------------------------
# evaluate

def cmd_evaluate(args) -> int:
    instance = load_instance(args.instance)
    solution = load_solution(args.solution)
    check_solution(instance, solution)
    sched = construct_schedule(instance, solution)
    cost = evaluate(instance, solution, sched, args.alpha, args.scope)
    if args.schedule_out:
        write_schedule_csv(sched, args.schedule_out,
                           f"config_hash={config_hash({'instance': args.instance, 'solution': args.solution})}")
    print(json.dumps({**cost.to_dict(), "feasible": cost.feasible}, indent=1, sort_keys=True))
    return 0


# --------------------------------------------------------------------------
# report

_TRIP_FIELDS = {"trip", "route_index", "start_s", "stagger_s", "travel_delta_s", "arrival_delta_s"}
_ARC_FIELDS = {"arc", "total_delay_s", "trips", "max_flow"}


def _histogram(values, width):
    bins = {}
    for v in values:
        b = width * round(v / width)
        bins[b] = bins.get(b, 0) + 1
    return sorted(bins.items())


def cmd_report(args) -> int:
    metrics, trip_files, arc_files = [], [], []
    for d in args.runs:
        d = Path(d)
        if not d.is_dir():
            print(f"error: not a run directory: {d}", file=sys.stderr)
            return EXIT_IO
        if (d / "metrics.csv").exists():
            rows = _read_csv(d / "metrics.csv")
            if rows and not set(METRIC_FIELDS) <= set(rows[0]):
                print(f"error: {d / 'metrics.csv'}: unexpected columns", file=sys.stderr)
                return EXIT_IO
            metrics.extend(rows)
        trip_files.extend(sorted(d.glob("trips_*.csv")))
        arc_files.extend(sorted(d.glob("arcs_*.csv")))
    if not metrics:
        print("error: no metrics found", file=sys.stderr)
        return EXIT_IO
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash({"runs": sorted(str(Path(d).resolve()) for d in args.runs)})

    # performance summary, relative to the reactive baseline of the same seed
    base = {(m["seed"], m["control_fraction"], m["objective"]): float(m["cost"])
            for m in metrics if m["variant"] == "rduo"}
    groups = {}
    for m in metrics:
        key = (m["variant"], m["control_fraction"], m["objective"])
        groups.setdefault(key, []).append(m)
    summary = []
    for (variant, frac, objective), rows in sorted(groups.items()):
        costs = [float(r["cost"]) for r in rows]
        reductions = [1 - float(r["cost"]) / base[(r["seed"], frac, objective)]
                      for r in rows if base.get((r["seed"], frac, objective), 0) > 0]
        summary.append({
            "variant": variant, "control_fraction": frac, "objective": objective, "runs": len(rows),
            "mean_cost": sum(costs) / len(costs),
            "mean_total_delay": sum(float(r["total_delay"]) for r in rows) / len(rows),
            "mean_infeasibility": sum(float(r["infeasibility"]) for r in rows) / len(rows),
            "mean_reduction_vs_rduo": sum(reductions) / len(reductions) if reductions else "",
            "mean_runtime_s": sum(float(r["runtime_s"]) for r in rows) / len(rows),
        })
    _write_csv(out / "summary.csv", list(summary[0]), summary, chash)

    stagger, arrival, routes, travel = {}, {}, {}, {}
    for path in trip_files:
        rows = _read_csv(path)
        if rows and not _TRIP_FIELDS <= set(rows[0]):
            print(f"error: {path}: unexpected columns", file=sys.stderr)
            return EXIT_IO
        variant = path.stem.split("_")[1]
        for r in rows:
            stagger.setdefault(variant, []).append(float(r["stagger_s"]))
            arrival.setdefault(variant, []).append(float(r["arrival_delta_s"]))
            travel.setdefault(variant, []).append(float(r["travel_delta_s"]))
            key = (variant, int(r["route_index"]))
            routes[key] = routes.get(key, 0) + 1
    hist_rows = []
    for name, data, width in (("stagger_s", stagger, args.bin), ("arrival_delta_s", arrival, args.bin),
                              ("travel_delta_s", travel, args.bin)):
        for variant, values in sorted(data.items()):
            for b, count in _histogram(values, width):
                hist_rows.append({"quantity": name, "variant": variant, "bin_s": b, "count": count})
    _write_csv(out / "histograms.csv", ["quantity", "variant", "bin_s", "count"], hist_rows, chash)
    _write_csv(out / "route_choice.csv", ["variant", "route_index", "trips"],
               [{"variant": v, "route_index": p, "trips": n} for (v, p), n in sorted(routes.items())], chash)

    arcs = {}
    for path in arc_files:
        rows = _read_csv(path)
        if rows and not _ARC_FIELDS <= set(rows[0]):
            print(f"error: {path}: unexpected columns", file=sys.stderr)
            return EXIT_IO
        variant = path.stem.split("_")[1]
        for r in rows:
            key = (variant, int(r["arc"]))
            arcs[key] = arcs.get(key, 0.0) + float(r["total_delay_s"])
    _write_csv(out / "arc_delays.csv", ["variant", "arc", "total_delay_s"],
               [{"variant": v, "arc": a, "total_delay_s": d} for (v, a), d in sorted(arcs.items())], chash)

    sweep = [{"variant": s["variant"], "control_fraction": s["control_fraction"], "objective": s["objective"],
              "mean_cost": s["mean_cost"], "mean_reduction_vs_rduo": s["mean_reduction_vs_rduo"]}
             for s in summary]
    _write_csv(out / "control_sweep.csv", list(sweep[0]), sweep, chash)
    print(f"wrote report for {len(metrics)} runs to {out}")
    return 0


# --------------------------------------------------------------------------
# validate-vickrey

def cmd_validate_vickrey(args) -> int:
    from .vickrey import DomainError, validation_table

    try:
        rows = validation_table(args.rho_grid, args.tau, args.n, args.seed)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    chash = config_hash({k: v for k, v in vars(args).items() if k not in ("out", "func", "verbose")})
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        fh.write(f"# config_hash={chash}\n")
        w = csv.writer(fh)
        w.writerow(["rho", "analytic", "linear", "simulated", "se"])
        for row in rows:
            w.writerow([repr(x) for x in row])
    finally:
        if args.out:
            fh.close()
    return 0


# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="balstag", description="Route balancing and departure staggering for fleets of trips.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--nodes", required=True, help="grid:RxC or ring:N[+C]")
    g.add_argument("--trips", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--profile", choices=["uniform", "peak"], default="uniform")
    g.add_argument("--sigma", type=float, default=0.2, help="max staggering as a fraction of free-flow time")
    g.add_argument("--deadline", choices=["freeflow", "rduo"], default="freeflow")
    g.add_argument("--k", type=_positive_int, default=5)
    g.add_argument("--theta", type=_fraction, default=0.6)
    g.add_argument("--horizon", type=float, default=3600.0)
    g.add_argument("--delay", choices=["polynomial", "piecewise"], default="polynomial")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run a solver variant")
    s.add_argument("--instance", required=True)
    s.add_argument("--variant", choices=list(VARIANTS) + ["oracle"], default="integ")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--seeds", type=_seed_range, help="a..b or comma list; overrides --seed")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--pool", type=_fraction, default=0.4)
    s.add_argument("--sample", type=_fraction, default=0.1)
    s.add_argument("--cycles", type=_positive_int, default=2)
    s.add_argument("--preset", choices=["default", "stag"], default="default")
    s.add_argument("--time-limit", type=float, default=60.0)
    s.add_argument("--max-iterations", type=_positive_int)
    s.add_argument("--single-start", action="store_true",
                   help="integ starts from its own greedy construction only")
    s.add_argument("--grid", type=float, help="restrict start times to a grid of this step (s)")
    s.add_argument("--control-fraction", type=float, default=1.0)
    s.add_argument("--control-seed", type=int, default=0)
    s.add_argument("--objective", choices=["welfare", "fleet"], default="welfare")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="cost of a solution file")
    e.add_argument("--instance", required=True)
    e.add_argument("--solution", required=True)
    e.add_argument("--alpha", type=float, default=10.0)
    e.add_argument("--scope", choices=["system", "fleet"], default="system")
    e.add_argument("--schedule-out")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="aggregate run directories into CSV tables")
    r.add_argument("runs", nargs="+")
    r.add_argument("--out", required=True)
    r.add_argument("--bin", type=float, default=10.0, help="histogram bin width (s)")
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("validate-vickrey", help="linear estimator vs. simulated bottleneck")
    v.add_argument("--rho-grid", type=_rho_grid, default=_rho_grid("0.05:0.95:0.05"))
    v.add_argument("--tau", type=float, default=1.0)
    v.add_argument("--n", type=_positive_int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate_vickrey)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, PropagationBudgetExceeded) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (OSError, InstanceError, SolutionError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
