"""Command-line front end.

    lagocp solve|simulate|direct|verify|compare --config run.toml [options]

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(non-convergence). A CSV of the best iterate is written even on exit 2.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .bvp import objective_of, shoot_multistart
from .config import RunConfig, load_config
from .csvio import SchemaError, TrajectoryTable, read_table, write_table
from .diagnostics import SymmetryGenerator, drift_report, pmp_residual_along, symplecticity_check
from .direct import DirectResult, optimize
from .errors import ConfigError, ConvergenceError, IntegrationError, OCPError
from .forms import CombinedState, CombinedVelocity
from .integrator import DiscreteTrajectory, Grid, del_residual, integrate_ivp
from .model import Problem

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("lagocp")


def _use_color() -> bool:
    return sys.stdout.isatty() and "NO_COLOR" not in os.environ


def _verdict(ok: bool) -> str:
    word = "PASS" if ok else "FAIL"
    if _use_color():
        return f"\033[{32 if ok else 31}m{word}\033[0m"
    return word


def _out_path(args, cfg: RunConfig) -> str:
    return args.out or cfg.output.csv or f"{args.command}.csv"


def indirect_table(traj: DiscreteTrajectory, problem: Problem, gen: Optional[SymmetryGenerator]) -> TrajectoryTable:
    running = 0.5 * np.sum(traj.u**2, axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * traj.grid.h * (running[1:] + running[:-1]))])
    H = drift_report(traj, "hamiltonian", problem.force).values
    noether = drift_report(traj, gen).values if gen is not None else np.full(traj.grid.N + 1, np.nan)
    columns = {
        "q": traj.q,
        "qdot": traj.qdot,
        "lam": traj.lam,
        "lamdot": traj.lamdot,
        "u": traj.u,
        "H_tilde": H,
        "noether": noether,
        "objective_running": cumulative,
    }
    return TrajectoryTable(traj.t, columns)


def direct_table(result: DirectResult, grid: Grid) -> TrajectoryTable:
    N, n = result.controls.u.shape
    blank_vec = np.full((N + 1, n), np.nan)
    u = np.vstack([result.controls.u, np.full((1, n), np.nan)])
    running = np.concatenate([[0.0], np.cumsum(0.5 * grid.h * np.sum(result.controls.u**2, axis=1))])
    columns = {
        "q": result.q,
        "qdot": result.v,
        "lam": blank_vec,
        "lamdot": blank_vec,
        "u": u,
        "H_tilde": np.full(N + 1, np.nan),
        "noether": np.full(N + 1, np.nan),
        "objective_running": running,
    }
    return TrajectoryTable(grid.nodes, columns)


def _solve(cfg: RunConfig, seed: int):
    problem = cfg.build_problem()
    grid = cfg.build_grid()
    result = shoot_multistart(
        problem,
        grid,
        cfg.guess(problem.n),
        starts=cfg.solver.multistart,
        seed=seed,
        scale=cfg.solver.multistart_scale,
        opts=cfg.shoot_options(),
    )
    return problem, grid, result


def cmd_solve(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.solver.seed
    problem, grid, result = _solve(cfg, seed)
    path = _out_path(args, cfg)
    write_table(path, indirect_table(result.trajectory, problem, cfg.symmetry(problem)), cfg.output.precision)
    print(f"converged: {'yes' if result.converged else 'no'}")
    print(f"residual: {result.residual_norm:.6e}")
    print(f"objective: {result.objective:.12e}")
    print(f"iterations: {result.iterations}")
    print(f"lam0: {' '.join(f'{x:.12e}' for x in result.unknown.lam0)}")
    print(f"lamdot0: {' '.join(f'{x:.12e}' for x in result.unknown.lamdot0)}")
    print(f"csv: {path}")
    if not result.converged:
        print(f"shooting did not converge: {result.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _flag_vector(values: Optional[List[float]], n: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros(n)
    if len(values) != n:
        raise ConfigError(f"--{name} needs {n} values, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"--{name} values must be finite")
    return np.array(values, dtype=float)


def cmd_simulate(args, cfg: RunConfig) -> int:
    problem = cfg.build_problem()
    grid = cfg.build_grid()
    n = problem.n
    lam0 = _flag_vector(args.lam0, n, "lam0")
    lamdot0 = _flag_vector(args.lamdot0, n, "lamdot0")
    method = args.method or cfg.solver.method
    traj = integrate_ivp(
        CombinedState(problem.q0, lam0),
        CombinedVelocity(problem.v0, lamdot0),
        grid,
        problem.force,
        method,
        cfg.newton_options(),
    )
    path = _out_path(args, cfg)
    write_table(path, indirect_table(traj, problem, cfg.symmetry(problem)), cfg.output.precision)
    print(f"method: {method}")
    print(f"objective: {objective_of(traj, problem.phi):.12e}")
    print(f"csv: {path}")
    return EXIT_OK


def cmd_direct(args, cfg: RunConfig) -> int:
    problem = cfg.build_problem()
    grid = cfg.build_grid()
    result = optimize(problem, grid, opts=cfg.direct_options())
    path = _out_path(args, cfg)
    write_table(path, direct_table(result, grid), cfg.output.precision)
    print(f"converged: {'yes' if result.converged else 'no'}")
    print(f"gradient_norm: {result.gradient_norm:.6e}")
    print(f"objective: {result.objective:.12e}")
    print(f"iterations: {result.iterations}")
    print(f"csv: {path}")
    if not result.converged:
        print(f"direct optimizer did not converge: {result.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _trajectory_from_table(table: TrajectoryTable, grid: Grid) -> DiscreteTrajectory:
    if table.rows != grid.N + 1:
        raise SchemaError(f"CSV has {table.rows} rows, config grid needs N+1 = {grid.N + 1}")
    if np.max(np.abs(table.t - grid.nodes)) > 1e-12 * max(1.0, grid.T):
        raise SchemaError("CSV time column does not match the config grid")
    for name in ("q", "qdot", "lam", "lamdot"):
        if not table.has(name):
            raise SchemaError(f"CSV column {name} has blanks; only indirect trajectories can be verified")
    c = table.columns
    return DiscreteTrajectory(grid, c["q"], c["lam"], -c["lamdot"], -c["qdot"])


def cmd_verify(args, cfg: RunConfig) -> int:
    if not args.csv:
        raise ConfigError("verify needs --csv <path>")
    problem = cfg.build_problem()
    grid = cfg.build_grid()
    table = read_table(args.csv)
    if table.n != problem.n:
        raise SchemaError(f"CSV has n={table.n}, config problem has n={problem.n}")
    traj = _trajectory_from_table(table, grid)
    v = cfg.verify
    force = problem.force

    checks = []
    if grid.N + 1 >= 3:
        checks.append(("del_residual", del_residual(traj, force), v.del_tol, v.strict_del))
    if grid.N + 1 >= 5:
        checks.append(("pmp_residual", pmp_residual_along(traj, force), v.pmp_tol, True))
    checks.append(("hamiltonian_drift", drift_report(traj, "hamiltonian", force).drift, v.hamiltonian_tol, True))
    gen = cfg.symmetry(problem)
    if gen is not None:
        checks.append(("noether_drift", drift_report(traj, gen).drift, v.noether_tol, True))
    defect = symplecticity_check(problem, grid.h, traj.phase_point(0), v.fd_increment, newton_opts=cfg.newton_options())
    checks.append(("symplecticity_defect", defect, v.symplectic_tol, True))

    ok = True
    for name, value, tol, gating in checks:
        passed = value <= tol
        note = "" if gating else " (informational)"
        print(f"{name}: {value:.3e} <= {tol:.1e} {_verdict(passed)}{note}")
        ok &= passed or not gating
    print(f"verify: {_verdict(ok)}")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_compare(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.solver.seed
    problem = cfg.build_problem()
    sizes = [cfg.grid.N] + [N for N in (args.refine or []) if N != cfg.grid.N]
    status = EXIT_OK
    print(f"{'N':>6} {'control_gap':>14} {'objective_gap':>14} {'J_indirect':>20} {'J_direct':>20}")
    for N in sizes:
        grid = Grid(problem.T, N)
        try:
            indirect = shoot_multistart(problem, grid, cfg.guess(problem.n), starts=cfg.solver.multistart,
                                        seed=seed, scale=cfg.solver.multistart_scale, opts=cfg.shoot_options())
        except (ConvergenceError, IntegrationError) as exc:
            print(f"{N:>6} indirect pipeline failed: {exc}")
            status = EXIT_NUMERIC
            continue
        direct = optimize(problem, grid, opts=cfg.direct_options())
        gap_u = float(np.max(np.abs(direct.controls.u - indirect.trajectory.lam[:-1])))
        gap_J = abs(direct.objective - indirect.objective)
        print(f"{N:>6} {gap_u:>14.6e} {gap_J:>14.6e} {indirect.objective:>20.12e} {direct.objective:>20.12e}")
        if not indirect.converged:
            print(f"{N:>6} indirect did not converge (residual {indirect.residual_norm:.3e})")
            status = EXIT_NUMERIC
        if not direct.converged:
            print(f"{N:>6} direct did not converge (gradient {direct.gradient_norm:.3e})")
            status = EXIT_NUMERIC
    return status


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "direct": cmd_direct,
    "verify": cmd_verify,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagocp", description="State-adjoint Lagrangian optimal control solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--method", choices=("variational", "rk4"), help="integrator for simulate")
    parser.add_argument("--lam0", type=float, nargs="+", help="initial adjoint for simulate")
    parser.add_argument("--lamdot0", type=float, nargs="+", help="initial adjoint rate for simulate")
    parser.add_argument("--out", help="CSV output path (overrides output.csv)")
    parser.add_argument("--csv", help="trajectory CSV to check (verify)")
    parser.add_argument("--seed", type=int, help="multi-start seed (overrides solver.seed)")
    parser.add_argument("--refine", type=int, nargs="*", help="extra grid sizes for compare")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OCPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
