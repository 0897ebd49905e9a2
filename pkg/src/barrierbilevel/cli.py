"""Command-line entry point: ``barrierbilevel {run,certify,bench-toll,bench-hexagon,diagnose}``.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 schedule certification failed.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diagnostics as diag
from . import io, plotting
from .barrier import BarrierProblem
from .bmfo import certify_barrier_aware, certified_polynomial_schedule, run
from .config import (
    ExperimentConfig,
    build_custom,
    config_from_dict,
    custom_constants,
    hexagon_config,
    load_config,
    parse_seeds,
    schedule_from_config,
    toll_params,
)
from .errors import BarrierBilevelError, InvalidConfig, InvalidInput, InvalidParameter, NotSPD
from .problem import StochasticUpperOracle

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_UNCERTIFIED = 0, 1, 2, 3
BIAS_MU_LIST = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
PROXY_LAMBDAS = (10.0, 100.0, 1000.0, 10000.0)
CONFIG_ERRORS = (InvalidConfig, InvalidParameter, InvalidInput, NotSPD)


@dataclass
class Problem:
    bp: BarrierProblem
    schedule: object
    constants: object
    x0: np.ndarray
    x_box: Optional[tuple]
    f_grad_source: object
    meta: dict


def build_problem(cfg: ExperimentConfig, seed: int) -> Problem:
    """Instance, schedule and constants for one seed of a run/certify/diagnose config."""
    if cfg.experiment == "hexagon":
        from .benchmarks.hexagon import build_hexagon_example, hexagon_local_constants, hexagon_schedule
        hc = hexagon_config(cfg)
        _, inst, grid = build_hexagon_example(hc)
        consts = hexagon_local_constants(hc)
        sched = (hexagon_schedule(hc, consts) if cfg.schedule == "certified"
                 else schedule_from_config(cfg, hc.mu))
        return Problem(BarrierProblem(inst, hc.mu), sched, consts, grid[:1].copy(), None, None,
                       {"hexagon": hc})
    if cfg.experiment == "toll":
        from .benchmarks.toll import X_BOX, generate_toll_instance, toll_bilevel_instance, toll_local_constants
        n, tau, mu = toll_params(cfg)
        ti = generate_toll_instance(n, seed, tau)
        P, inst = toll_bilevel_instance(ti)
        eta = cfg.schedule.get("eta", 0.25) if isinstance(cfg.schedule, dict) else 0.25
        T = cfg.schedule.get("T", 3) if isinstance(cfg.schedule, dict) else 3
        consts = toll_local_constants(ti, mu, eta, P)
        sched = (certified_polynomial_schedule(consts, T, eta, mu) if cfg.schedule == "certified"
                 else schedule_from_config(cfg, mu))
        box = tuple(cfg.x_box) if cfg.x_box is not None else X_BOX
        return Problem(BarrierProblem(inst, mu), sched, consts, ti.x0.copy(), box, None,
                       {"toll": ti})
    inst, mu = build_custom(cfg)
    eta = cfg.schedule.get("eta", 0.25) if isinstance(cfg.schedule, dict) else 0.25
    T = cfg.schedule.get("T", 5) if isinstance(cfg.schedule, dict) else 5
    consts = None
    if cfg.constants is not None or cfg.schedule == "certified":
        consts = custom_constants(cfg, inst, mu, eta)
    sched = (certified_polynomial_schedule(consts, T, eta, mu) if cfg.schedule == "certified"
             else schedule_from_config(cfg, mu))
    src = None
    if cfg.noise:
        src = StochasticUpperOracle(inst, float(cfg.noise.get("radius_x", 0.0)),
                                    float(cfg.noise.get("radius_y", 0.0)), seed)
    return Problem(BarrierProblem(inst, mu), sched, consts, np.asarray(cfg.x0, float),
                   tuple(cfg.x_box) if cfg.x_box is not None else None, src, {})


def _seed_dir(out: str, seeds, seed: int) -> str:
    return out if len(seeds) == 1 else os.path.join(out, f"seed_{seed}")


def _out_dir(args, cfg: Optional[ExperimentConfig], default: str = "out") -> str:
    if args.out:
        return args.out
    return cfg.output_dir if cfg is not None else default


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seeds", None):
        cfg.seeds = parse_seeds(args.seeds)
    if getattr(args, "budget_ms", None) is not None:
        if args.budget_ms < 0:
            raise InvalidConfig("--budget-ms must be nonnegative")
        cfg.budget_ms = args.budget_ms
    return cfg


# --------------------------------------------------------------------------
# diagnostics shared by run and diagnose
# --------------------------------------------------------------------------

def run_diagnostics(cfg: ExperimentConfig, prob: Problem, trace, out: str, flags) -> dict:
    bp = prob.bp
    written = {}
    x_ref = trace.records[0].x
    if "tube" in flags:
        rep = diag.tube_report(trace, bp)
        written["tube_report"] = io.write_csv(os.path.join(out, "tube_report.csv"), diag.TUBE_COLUMNS, rep.rows)
        plotting.tube_figure(rep, os.path.join(out, "tube_report.png"))
    if "stationarity" in flags and bp.instance.has_second_order:
        every = max(1, trace.K // 200)
        ks, vals, rmin = diag.stationarity_series(trace, bp, every=every)
        written["stationarity"] = io.write_csv(os.path.join(out, "stationarity.csv"),
                                               diag.STATIONARITY_COLUMNS, zip(ks, vals, rmin))
        plotting.stationarity_figure(ks, vals, rmin, os.path.join(out, "stationarity.png"))
    if "bias" in flags:
        rep = diag.bias_report(bp.instance, x_ref, BIAS_MU_LIST)
        written["bias_report"] = io.write_csv(os.path.join(out, "bias_report.csv"), diag.BIAS_COLUMNS, rep.rows)
        plotting.bias_figure(rep, os.path.join(out, "bias_report.png"))
    if "proxy_bias" in flags and bp.instance.has_second_order:
        rows, slope = diag.proxy_bias_curve(bp, x_ref, PROXY_LAMBDAS)
        written["proxy_bias"] = io.write_csv(os.path.join(out, "proxy_bias.csv"),
                                             ("lambda", "bias"), rows)
        plotting.proxy_bias_figure(rows, os.path.join(out, "proxy_bias.png"))
        written["proxy_bias_slope"] = slope
    return written


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _hexagon_outputs(result, out: str) -> dict:
    paths = io.write_trace(out, result.barrier_trace)
    rows = []
    for k in range(len(result.grid)):
        rows.append((k, result.grid[k], result.barrier_tube.rows[k][1], result.euclidean_tube.rows[k][1],
                     result.barrier_gap[k], result.euclidean_gap[k], result.barrier_f[k],
                     result.euclidean_f[k], result.center_f[k], *result.centers[k],
                     *result.barrier_trace.records[k].z, *result.euclidean_z[k]))
    paths["hexagon"] = io.write_csv(os.path.join(out, "hexagon.csv"), io.HEXAGON_COLUMNS, rows)
    paths["tube_report"] = io.write_csv(os.path.join(out, "tube_report.csv"), diag.TUBE_COLUMNS,
                                        result.barrier_tube.rows)
    io.write_json(os.path.join(out, "summary.json"), result.summary())
    plotting.hexagon_figure(result, os.path.join(out, "hexagon.png"))
    return paths


def cmd_run(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(args, cfg)
    flags = [f for f in ("tube", "bias", "stationarity", "proxy_bias") if cfg.wants(f)]
    if cfg.experiment == "hexagon":
        from .benchmarks.hexagon import run_hexagon_comparison
        prob = build_problem(cfg, cfg.seeds[0])
        hc = prob.meta["hexagon"]
        result = run_hexagon_comparison(hc, prob.schedule)
        _hexagon_outputs(result, out)
        extra = [f for f in flags if f != "tube"]
        if extra:
            run_diagnostics(cfg, prob, result.barrier_trace, out, extra)
        print(f"hexagon: barrier max error {result.barrier_tube.max_exact_err:.4g}, "
              f"euclidean first exit {result.euclidean_tube.first_exit_index}; wrote {out}")
        return EXIT_OK

    for seed in cfg.seeds:
        prob = build_problem(cfg, seed)
        sdir = _seed_dir(out, cfg.seeds, seed)
        summary = {"experiment": cfg.experiment, "seed": seed, "K": cfg.K,
                   "schedule": prob.schedule.to_dict()}
        if cfg.experiment == "toll":
            from .benchmarks.toll import original_objective, run_bmfo_toll
            ti = prob.meta["toll"]
            io.write_json(os.path.join(sdir, "instance.json"), ti.to_dict())
            res = run_bmfo_toll(ti, prob.schedule, cfg.K, cfg.budget_ms, prob.bp.instance)
            trace = res.trace
            summary.update(status=res.status, iterations=res.iterations,
                           F_orig_final=original_objective(ti, res.x_final, prob.bp.instance))
        else:
            trace = run(prob.bp, prob.schedule, prob.x0, cfg.K, f_grad_source=prob.f_grad_source,
                        x_box=prob.x_box)
        summary["guard_activations"] = trace.guard_activations
        summary["x_final"] = trace.records[-1].x
        io.write_trace(sdir, trace)
        summary["diagnostics"] = run_diagnostics(cfg, prob, trace, sdir, flags)
        io.write_json(os.path.join(sdir, "summary.json"), summary)
        print(f"{cfg.experiment} seed {seed}: {trace.K} outer iterations, "
              f"{trace.guard_activations} guard activations; wrote {sdir}")
    return EXIT_OK


def cmd_certify(cfg: ExperimentConfig, args) -> int:
    prob = build_problem(cfg, cfg.seeds[0])
    if prob.constants is None:
        raise InvalidConfig("certify needs a 'constants' block for custom experiments")
    K = cfg.K if cfg.K > 0 else 1
    report = certify_barrier_aware(prob.schedule, prob.constants, K)
    print(report.table())
    failing = report.failing_conditions()
    if failing:
        print("failing conditions: " + ", ".join(f"({c})" for c in failing))
    if args.out:
        io.write_csv(os.path.join(args.out, "certify.csv"), io.CERTIFY_COLUMNS,
                     [(c.name, c.condition, c.verdict(), c.first_violation, c.margin) for c in report.checks])
        io.write_json(os.path.join(args.out, "certify.json"),
                      {"passed": report.passed, "schedule": prob.schedule.to_dict(),
                       "constants": prob.constants.to_dict(), "K": K})
    return EXIT_OK if report.passed else EXIT_UNCERTIFIED


def _bench_cell(job):
    """One (n, seed) toll cell; runs in a worker process."""
    from .benchmarks.toll import (
        generate_toll_instance,
        normalized_gap,
        original_objective,
        reference_pool,
        run_bmfo_toll,
        toll_bilevel_instance,
    )
    n, seed, tau, mu, sched_doc, K, budget, ref_factor, cell_dir = job
    base = {"n": n, "seed": seed, "tau": tau, "method": "BMFO"}
    try:
        ti = generate_toll_instance(n, seed, tau)
        _, inst = toll_bilevel_instance(ti)
        if sched_doc == "certified":
            from .benchmarks.toll import certified_toll_schedule
            schedule = certified_toll_schedule(ti, mu)[0]
        else:
            schedule = schedule_from_config(config_from_dict(
                {"experiment": "toll", "K": K, "schedule": sched_doc}), mu)
        io.write_json(os.path.join(cell_dir, "instance.json"), ti.to_dict())
        res = run_bmfo_toll(ti, schedule, K, budget, inst)
        F = original_objective(ti, res.x_final, inst)
        F_ref, members = reference_pool(ti, mu, K, schedule, ref_factor * K)
        spu = res.wall_time_ms / 1e3 / res.iterations if res.iterations else None
        row = dict(base, iterations=res.iterations, final_normalized_gap=normalized_gap(F, F_ref),
                   wall_time_ms=res.wall_time_ms, seconds_per_update=spu, F_orig=F, F_ref=F_ref,
                   status=res.status)
        return row, members
    except BarrierBilevelError as exc:
        row = dict(base, iterations=0, final_normalized_gap=None, wall_time_ms=None,
                   seconds_per_update=None, F_orig=None, F_ref=None,
                   status=f"failed:{type(exc).__name__}")
        return row, {}


def cmd_bench_toll(cfg: Optional[ExperimentConfig], args) -> int:
    if cfg is None:
        cfg = config_from_dict({"experiment": "toll", "K": 500, "schedule": DEFAULT_TOLL_SCHEDULE})
        cfg = _apply_overrides(cfg, args)
    if cfg.experiment != "toll":
        raise InvalidConfig("bench-toll needs a toll config")
    _, tau, mu = toll_params(cfg)
    n_list = cfg.bench.get("n_list", [cfg.instance.get("n", 50)])
    if not n_list or not all(isinstance(n, int) and n >= 10 for n in n_list):
        raise InvalidConfig("bench.n_list must be a list of integers >= 10")
    ref_factor = int(cfg.bench.get("reference_iterations_factor", 50))
    out = _out_dir(args, cfg, "bench_out")
    jobs = [(n, s, tau, mu, cfg.schedule, cfg.K, cfg.budget_ms, ref_factor,
             os.path.join(out, "cells", f"n{n}_seed{s}")) for n in n_list for s in cfg.seeds]
    workers = max(1, int(args.parallel or 1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bench_cell, jobs))
    else:
        results = [_bench_cell(j) for j in jobs]
    rows = [r for r, _ in results]
    io.write_csv(os.path.join(out, "results.csv"), io.BENCH_COLUMNS,
                 [tuple(r[c] for c in io.BENCH_COLUMNS) for r in rows])
    ref_rows = [(r["n"], r["seed"], r["tau"], name, val)
                for r, members in results for name, val in sorted(members.items())]
    io.write_csv(os.path.join(out, "reference_pool.csv"), ("n", "seed", "tau", "member", "F_orig"), ref_rows)
    if any(r["final_normalized_gap"] is not None for r in rows):
        plotting.toll_bench_figure(rows, os.path.join(out, "toll_bench.png"))
    for r in rows:
        gap = r["final_normalized_gap"]
        print(f"n={r['n']} seed={r['seed']}: {r['status']}, {r['iterations']} updates, "
              f"gap {'n/a' if gap is None else f'{gap:.4g}'}")
    ok = any(not r["status"].startswith("failed") for r in rows)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_bench_hexagon(cfg: Optional[ExperimentConfig], args) -> int:
    from .benchmarks.hexagon import HexagonConfig, hexagon_schedule, run_hexagon_comparison
    if cfg is None:
        hc, schedule = HexagonConfig(), None
    else:
        if cfg.experiment != "hexagon":
            raise InvalidConfig("bench-hexagon needs a hexagon config")
        prob = build_problem(cfg, cfg.seeds[0])
        hc, schedule = prob.meta["hexagon"], prob.schedule
    out = _out_dir(args, cfg, "hexagon_out")
    result = run_hexagon_comparison(hc, schedule or hexagon_schedule(hc))
    _hexagon_outputs(result, out)
    s = result.summary()
    for key in ("gamma_barrier", "gamma_crit0", "gamma_euclidean", "barrier_max_err",
                "barrier_first_exit_index", "euclidean_first_exit_index", "guard_activations"):
        print(f"{key}: {s[key]}")
    return EXIT_OK


def cmd_diagnose(cfg: ExperimentConfig, args) -> int:
    trace_path = args.trace or os.path.join(cfg.output_dir, "trace.json")
    if not os.path.isfile(trace_path):
        raise InvalidConfig(f"trace file not found: {trace_path}")
    trace = io.load_trace(trace_path)
    prob = build_problem(cfg, cfg.seeds[0])
    if not np.isclose(trace.schedule.mu, prob.bp.mu):
        raise InvalidConfig("trace was produced with a different mu than the config")
    flags = [f for f in ("tube", "bias", "stationarity", "proxy_bias") if cfg.wants(f)]
    flags = flags or ["tube", "stationarity"]
    out = args.out or os.path.dirname(os.path.abspath(trace_path))
    written = run_diagnostics(cfg, prob, trace, out, flags)
    for key, val in written.items():
        print(f"{key}: {val}")
    return EXIT_OK


DEFAULT_TOLL_SCHEDULE = {"kind": "deterministic_polynomial", "alpha0": 4.455e-05, "gamma0": 0.004455,
                         "lambda0": 100.0, "k0": 1.0, "xi": 1000.0, "T": 3, "eta": 0.25}

COMMANDS = {
    "run": cmd_run,
    "certify": cmd_certify,
    "bench-toll": cmd_bench_toll,
    "bench-hexagon": cmd_bench_hexagon,
    "diagnose": cmd_diagnose,
}
CONFIG_OPTIONAL = {"bench-toll", "bench-hexagon"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--seeds", metavar="CSV", help="comma-separated seeds, e.g. 0,1,2")
    common.add_argument("--budget-ms", type=float, metavar="N", help="wall-clock budget per run")
    common.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    parser = argparse.ArgumentParser(prog="barrierbilevel",
                                     description="Barrier-metric first-order bilevel optimization.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the configured experiment")
    sub.add_parser("certify", parents=[common], help="check the barrier-aware schedule conditions")
    sub.add_parser("bench-toll", parents=[common], help="congestion-toll benchmark grid")
    sub.add_parser("bench-hexagon", parents=[common], help="hexagon boundary-stability comparison")
    p = sub.add_parser("diagnose", parents=[common], help="diagnostics for an existing trace")
    p.add_argument("--trace", metavar="PATH", help="trace.json (default: <output_dir>/trace.json)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = None
        if args.config:
            cfg = _apply_overrides(load_config(args.config), args)
        elif args.command not in CONFIG_OPTIONAL:
            raise InvalidConfig(f"{args.command} needs --config")
        return COMMANDS[args.command](cfg, args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BarrierBilevelError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
