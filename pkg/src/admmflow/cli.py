"""Command-line harness: generate problems, run solvers and flows, fit rates,
and reproduce the benchmark experiment end to end.

Exit codes: 0 success, 2 usage or input error, 3 numerical divergence,
4 rate-check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from .analysis import (
    fit_rate,
    monitor_aadmm_rate,
    monitor_aadmm_stability,
    monitor_admm_rate,
    monitor_admm_stability,
    sup_discrepancy,
    write_monitor_csv,
)
from .discrete import run_aadmm, run_admm
from .exceptions import AdmmFlowError, DivergenceError, WindowError
from .flows import (
    DEFAULT_RK4_H,
    DEFAULT_SYMPLECTIC_H,
    IntegratorConfig,
    aadmm_flow_integrate,
    rk4_integrate,
)
from .problem import gen_figure1_problem, load_problem, optimal_value, save_problem
from .trajectory import Trajectory, load_trajectory_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_CHECK_FAILED = 4

OUTDIR_ENV = "ADMMFLOW_OUTDIR"

SOLVERS = ("admm", "aadmm", "admm_flow", "aadmm_flow")
# the --integrator flag selects the corresponding flow run
INTEGRATOR_TO_SOLVER = {"rk4": "admm_flow", "symplectic": "aadmm_flow"}

FIGURE1_DEFAULT_SEED = 38


def _default_outdir():
    return os.environ.get(OUTDIR_ENV, ".")


def _matrix_rank(M):
    svals = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(svals > 1e-8 * svals[0])) if svals[0] > 0 else 0


def cmd_gen(args):
    problem = gen_figure1_problem(
        args.n, args.zero_eigs, args.eig_hi, args.cond_a, seed=args.seed, m=args.m
    )
    out = args.out or os.path.join(_default_outdir(), "problem.json")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_problem(problem, out)
    print(f"wrote {out}")
    print(f"n={problem.n} m={problem.m} rank(M_f)={_matrix_rank(problem.f.M)} "
          f"cond(A)={problem.cond_A:.6f}")
    return EXIT_OK


def _run_one(problem, solver, x0, args):
    """Run one solver/flow; returns (trajectory, divergence_error_or_None)."""
    try:
        if solver == "admm":
            return run_admm(problem, x0, rho=args.rho, max_iter=args.max_iter,
                            stop_tol=args.stop_tol), None
        if solver == "aadmm":
            return run_aadmm(problem, x0, rho=args.rho, r=args.r,
                             max_iter=args.max_iter, stop_tol=args.stop_tol), None
        if solver == "admm_flow":
            h = args.h if args.h is not None else DEFAULT_RK4_H
            t0 = args.t0 if args.t0 is not None else 0.0
            t_end = args.t_end if args.t_end is not None else args.max_iter / args.rho
            return rk4_integrate(problem, x0, IntegratorConfig(h=h, t0=t0, t_end=t_end)), None
        h = args.h if args.h is not None else DEFAULT_SYMPLECTIC_H
        t0 = args.t0 if args.t0 is not None else h
        t_end = args.t_end if args.t_end is not None else args.max_iter / math.sqrt(args.rho)
        config = IntegratorConfig(h=h, t0=t0, t_end=t_end, r=args.r)
        return aadmm_flow_integrate(problem, x0, config), None
    except DivergenceError as err:
        return err.trajectory, err


def cmd_run(args):
    solvers = list(dict.fromkeys((args.solver or []) +
                                 [INTEGRATOR_TO_SOLVER[i] for i in (args.integrator or [])]))
    if not solvers:
        print("error: no solver selected (use --solver/--integrator)", file=sys.stderr)
        return EXIT_USAGE
    problem = load_problem(args.problem)
    x0 = np.full(problem.n, args.x0)
    outdir = args.out_dir or _default_outdir()
    os.makedirs(outdir, exist_ok=True)
    for solver in solvers:
        path = os.path.join(outdir, f"{solver}.csv")
        traj, err = _run_one(problem, solver, x0, args)
        if err is not None:
            if traj is not None:
                traj.to_csv(path, truncation_note=f"divergence near t={err.t_last:.6g}")
            print(f"error: {solver} diverged: {err}", file=sys.stderr)
            return EXIT_DIVERGENCE
        traj.to_csv(path)
        print(f"{solver}: wrote {path}, final V_gap={traj.v_gap[-1]:.6e}")
    return EXIT_OK


def _interp_or_blank(grid, traj):
    cells = []
    for t in grid:
        if traj.t[0] <= t <= traj.t[-1]:
            cells.append(repr(float(np.interp(t, traj.t, traj.v_gap))))
        else:
            cells.append("")
    return cells


def cmd_figure1(args):
    rhos = args.rho or [50.0]
    outdir = args.out_dir or os.path.join(_default_outdir(), "figure1_out")
    os.makedirs(outdir, exist_ok=True)
    t_start = time.perf_counter()

    problem = gen_figure1_problem(60, 40, 10.0, 100.0, seed=args.seed)
    problem_path = os.path.join(outdir, "problem.json")
    save_problem(problem, problem_path)
    x_star, v_star = optimal_value(problem)
    x0 = 5.0 * np.ones(problem.n)
    files = {"problem": problem_path}
    window = (args.window_lo, args.window_hi)

    # flows are penalty-free: integrate once, covering the rate window and
    # the longest discrete time range (t = k/rho and t = k/sqrt(rho))
    try:
        t_end_plain = max(args.window_hi, args.max_iter / min(rhos))
        plain_flow = rk4_integrate(
            problem, x0, IntegratorConfig(h=args.h_rk4, t0=0.0, t_end=t_end_plain)
        )
        h_s = args.h_symplectic
        t0_s = args.t0 if args.t0 is not None else h_s
        t_end_acc = max(args.window_hi, args.max_iter / math.sqrt(min(rhos)))
        acc_flow = aadmm_flow_integrate(
            problem, x0, IntegratorConfig(h=h_s, t0=t0_s, t_end=t_end_acc, r=args.r)
        )
    except DivergenceError as err:
        print(f"error: flow integration diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE

    for name, traj in (("admm_flow", plain_flow), ("aadmm_flow", acc_flow)):
        path = os.path.join(outdir, f"{name}.csv")
        traj.to_csv(path)
        files[name] = path

    discrete = {}
    for rho in rhos:
        for method, runner in (("admm", run_admm), ("aadmm", run_aadmm)):
            kwargs = {"rho": rho, "max_iter": args.max_iter}
            if method == "aadmm":
                kwargs["r"] = args.r
            try:
                traj = runner(problem, x0, **kwargs)
            except DivergenceError as err:
                print(f"error: {method} at rho={rho:g} diverged: {err}", file=sys.stderr)
                return EXIT_DIVERGENCE
            path = os.path.join(outdir, f"{method}_rho{rho:g}.csv")
            traj.to_csv(path)
            files[f"{method}_rho{rho:g}"] = path
            discrete[(method, rho)] = traj

    monitors = {
        "monitor_admm_flow_stability": monitor_admm_stability(problem, plain_flow, x_star),
        "monitor_admm_flow_rate": monitor_admm_rate(problem, plain_flow, x_star),
        "monitor_aadmm_flow_stability": monitor_aadmm_stability(problem, acc_flow, x_star),
        "monitor_aadmm_flow_rate": monitor_aadmm_rate(problem, acc_flow, x_star),
    }
    monitor_summary = {}
    for name, samples in monitors.items():
        path = os.path.join(outdir, f"{name}.csv")
        write_monitor_csv(samples, path)
        files[name] = path
        monitor_summary[name] = sum(s.decay_ok for s in samples) / len(samples)

    fits = {
        "admm_flow": fit_rate(plain_flow, v_star, window, slope_target=-1.0),
        "aadmm_flow": fit_rate(acc_flow, v_star, window, slope_target=-2.0),
    }
    rates_path = os.path.join(outdir, "rates.csv")
    with open(rates_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "slope", "C", "window_lo", "window_hi", "n_samples"])
        for name, fit in fits.items():
            writer.writerow([name] + fit.summary().split(","))
    files["rates"] = rates_path

    discrepancies = []
    for rho in rhos:
        discrepancies.append(
            {
                "rho": rho,
                "admm_vs_flow": sup_discrepancy(discrete[("admm", rho)], plain_flow),
                "aadmm_vs_flow": sup_discrepancy(discrete[("aadmm", rho)], acc_flow),
            }
        )
    disc_path = os.path.join(outdir, "discrepancy.csv")
    with open(disc_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rho", "admm_vs_flow", "aadmm_vs_flow"])
        for row in discrepancies:
            writer.writerow([repr(row["rho"]), repr(row["admm_vs_flow"]),
                             repr(row["aadmm_vs_flow"])])
    files["discrepancy"] = disc_path

    # overlay of V-gap vs t for all four methods at the first rho
    rho0 = rhos[0]
    curves = [
        ("admm", discrete[("admm", rho0)]),
        ("admm_flow", plain_flow),
        ("aadmm", discrete[("aadmm", rho0)]),
        ("aadmm_flow", acc_flow),
    ]
    t_max = max(traj.t[-1] for _, traj in curves)
    grid = np.linspace(0.0, t_max, args.overlay_points)
    overlay_path = os.path.join(outdir, "overlay.csv")
    with open(overlay_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"V_gap_{name}" for name, _ in curves])
        columns = [_interp_or_blank(grid, traj) for _, traj in curves]
        for i, t in enumerate(grid):
            writer.writerow([repr(float(t))] + [col[i] for col in columns])
    files["overlay"] = overlay_path

    report = {
        "params": {
            "seed": args.seed,
            "rho": rhos,
            "r": args.r,
            "max_iter": args.max_iter,
            "h_rk4": args.h_rk4,
            "h_symplectic": args.h_symplectic,
            "x0": 5.0,
            "window": list(window),
        },
        "v_star": v_star,
        "final_v_gap": {
            f"{method}_rho{rho:g}": float(discrete[(method, rho)].v_gap[-1])
            for method, rho in discrete
        },
        "rate_fits": {name: {"slope": fit.slope, "C": fit.C, "window": list(fit.window),
                             "n_samples": fit.n_samples} for name, fit in fits.items()},
        "discrepancies": discrepancies,
        "monitor_decay_fraction": monitor_summary,
        "files": files,
        "wall_time_s": time.perf_counter() - t_start,
    }
    report_path = os.path.join(outdir, "report.json")  # index, written last
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")

    for name, fit in fits.items():
        print(f"{name}: slope={fit.slope:.4f} C={fit.C:.4g} on t in [{window[0]:g}, {window[1]:g}]")
    for row in discrepancies:
        print(f"rho={row['rho']:g}: sup-discrepancy admm={row['admm_vs_flow']:.4f} "
              f"aadmm={row['aadmm_vs_flow']:.4f}")
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_rates(args):
    cols = load_trajectory_csv(args.trajectory)
    if "t" not in cols or "V_gap" not in cols:
        print("error: trajectory CSV must have t and V_gap columns", file=sys.stderr)
        return EXIT_USAGE
    v_star = args.v_star
    if args.problem is not None:
        _, v_star = optimal_value(load_problem(args.problem))
    gap = cols["V_gap"]
    traj = Trajectory(t=cols["t"], V=gap, v_gap=gap - v_star)
    try:
        fit = fit_rate(traj, v_star, (args.window_lo, args.window_hi),
                       slope_target=args.target)
    except WindowError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    print("slope,C,window_lo,window_hi,n_samples")
    print(fit.summary())
    if fit.slope <= args.target + args.tol:
        return EXIT_OK
    print(f"rate check failed: slope {fit.slope:.4f} > target {args.target:g} "
          f"+ tol {args.tol:g}", file=sys.stderr)
    return EXIT_CHECK_FAILED


def build_parser():
    parser = argparse.ArgumentParser(
        prog="admmflow",
        description="ADMM/accelerated-ADMM solvers, their continuous-limit flows, "
                    "and convergence diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate and save a random benchmark problem")
    gen.add_argument("--n", type=int, default=60, help="primal dimension (default 60)")
    gen.add_argument("--zero-eigs", type=int, default=40,
                     help="zero eigenvalues of the quadratic term (default 40)")
    gen.add_argument("--eig-hi", type=float, default=10.0,
                     help="upper end of the nonzero eigenvalue range (default 10)")
    gen.add_argument("--cond-a", type=float, default=100.0,
                     help="condition number of A (default 100)")
    gen.add_argument("--m", type=int, default=None, help="rows of A (default n)")
    gen.add_argument("--seed", type=int, default=7, help="RNG seed (default 7)")
    gen.add_argument("--out", default=None,
                     help="output path (default <outdir>/problem.json)")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser(
        "run",
        help="run solvers/flows on a saved problem; one CSV each",
        epilog="CSV columns: discrete methods k,t,V_gap,primal_residual,x_norm "
               "(t = k/rho for admm, k/sqrt(rho) for aadmm); flows "
               "t,V_gap[,hamiltonian],x_norm,xdot_norm. On divergence the "
               "partial CSV ends with a 'truncated,...' marker row.",
    )
    run.add_argument("--problem", required=True, help="problem JSON file")
    run.add_argument("--solver", action="append", choices=SOLVERS,
                     help="method to run (repeatable)")
    run.add_argument("--integrator", action="append", choices=sorted(INTEGRATOR_TO_SOLVER),
                     help="flow integrator to run: rk4 = first-order flow, "
                          "symplectic = second-order flow (repeatable)")
    run.add_argument("--rho", type=float, default=50.0, help="penalty parameter (default 50)")
    run.add_argument("--r", type=float, default=10.0, help="damping parameter (default 10)")
    run.add_argument("--max-iter", type=int, default=300,
                     help="iteration budget; also sets default flow t-end via the "
                          "method time scale (default 300)")
    run.add_argument("--stop-tol", type=float, default=0.0,
                     help="early-stop tolerance on primal residual + z movement (default 0)")
    run.add_argument("--h", type=float, default=None,
                     help="flow step size (defaults: rk4 1e-3, symplectic 1e-2)")
    run.add_argument("--t0", type=float, default=None,
                     help="flow start time (defaults: rk4 0, symplectic h)")
    run.add_argument("--t-end", type=float, default=None,
                     help="flow end time (default max_iter * method time scale)")
    run.add_argument("--x0", type=float, default=5.0,
                     help="initial point, replicated across coordinates (default 5)")
    run.add_argument("--out-dir", default=None, help=f"output directory (default ${OUTDIR_ENV} or .)")
    run.set_defaults(func=cmd_run)

    fig = sub.add_parser(
        "figure1",
        help="benchmark experiment: all four methods, monitors, rate fits, "
             "discrete-vs-flow discrepancies, overlay data",
        epilog="Outputs: trajectory CSVs as in 'run'; monitor CSVs "
               "t,E,decay_ok,residual; rates.csv method,slope,C,window_lo,"
               "window_hi,n_samples; discrepancy.csv rho,admm_vs_flow,"
               "aadmm_vs_flow; overlay.csv t plus one V-gap column per "
               "method; report.json index written last.",
    )
    fig.add_argument("--seed", type=int, default=FIGURE1_DEFAULT_SEED,
                     help=f"problem seed (default {FIGURE1_DEFAULT_SEED})")
    fig.add_argument("--rho", type=float, action="append",
                     help="penalty parameter, repeatable for a sweep (default 50)")
    fig.add_argument("--r", type=float, default=10.0, help="damping parameter (default 10)")
    fig.add_argument("--max-iter", type=int, default=300,
                     help="discrete iteration budget (default 300)")
    fig.add_argument("--h-rk4", type=float, default=DEFAULT_RK4_H,
                     help="first-order flow step (default 1e-3)")
    fig.add_argument("--h-symplectic", type=float, default=DEFAULT_SYMPLECTIC_H,
                     help="second-order flow step (default 1e-2)")
    fig.add_argument("--t0", type=float, default=None,
                     help="second-order flow start time (default h)")
    fig.add_argument("--window-lo", type=float, default=2.0,
                     help="rate-fit window lower end (default 2)")
    fig.add_argument("--window-hi", type=float, default=20.0,
                     help="rate-fit window upper end (default 20)")
    fig.add_argument("--overlay-points", type=int, default=2001,
                     help="grid size of the overlay file (default 2001)")
    fig.add_argument("--out-dir", default=None,
                     help=f"report directory (default ${OUTDIR_ENV}/figure1_out)")
    fig.set_defaults(func=cmd_figure1)

    rates = sub.add_parser("rates", help="fit a rate exponent on a trajectory CSV and gate on it")
    rates.add_argument("--trajectory", required=True, help="trajectory CSV (t, V_gap columns)")
    rates.add_argument("--v-star", type=float, default=0.0,
                       help="offset subtracted from V_gap before fitting (default 0; "
                            "this package's CSVs already store gaps)")
    rates.add_argument("--problem", default=None,
                       help="problem file whose optimal value supplies the offset "
                            "(for CSVs whose V_gap column holds raw objective values)")
    rates.add_argument("--target", type=float, required=True,
                       help="target slope, e.g. -1 or -2")
    rates.add_argument("--tol", type=float, default=0.1,
                       help="slack added to the target (default 0.1)")
    rates.add_argument("--window-lo", type=float, default=2.0)
    rates.add_argument("--window-hi", type=float, default=20.0)
    rates.set_defaults(func=cmd_rates)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, OSError, AdmmFlowError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
