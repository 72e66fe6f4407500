"""Single shooting for the state-adjoint boundary value problem.

Unknowns are the initial adjoint data z = (lam(0), lamdot(0)). The terminal
conditions are

    dphi/dq(q(T), qdot(T)) - lamdot(T) = 0,   dphi/dv(q(T), qdot(T)) + lam(T) = 0,

with terminal velocities taken from the discrete momenta.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConvergenceError, IntegrationError, OCPError, SingularityError
from .forms import CombinedState, CombinedVelocity
from .integrator import DiscreteTrajectory, Grid, NewtonOptions, integrate_ivp
from .model import Problem, TerminalCost, as_vector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShootingUnknown:
    lam0: np.ndarray
    lamdot0: np.ndarray

    def __post_init__(self):
        lam0 = as_vector(self.lam0, name="lam0")
        lamdot0 = as_vector(self.lamdot0, lam0.shape[0], "lamdot0")
        if not (np.all(np.isfinite(lam0)) and np.all(np.isfinite(lamdot0))):
            raise OCPError("shooting unknowns must be finite")
        object.__setattr__(self, "lam0", lam0)
        object.__setattr__(self, "lamdot0", lamdot0)

    @classmethod
    def zeros(cls, n: int) -> "ShootingUnknown":
        return cls(np.zeros(n), np.zeros(n))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.lam0, self.lamdot0])

    @classmethod
    def from_array(cls, z) -> "ShootingUnknown":
        n = len(z) // 2
        return cls(z[:n], z[n:])


@dataclass(frozen=True)
class ShootOptions:
    tol: float = 1e-9
    max_iter: int = 50
    fd_step: float = 1e-3  # large enough that integrator roundoff stays below tol
    armijo: float = 1e-4
    max_halvings: int = 20
    method: str = "variational"
    newton: NewtonOptions = NewtonOptions()


@dataclass
class ShootingResult:
    unknown: ShootingUnknown
    trajectory: DiscreteTrajectory
    residual_norm: float
    objective: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    message: str = ""


def terminal_residual(traj: DiscreteTrajectory, phi: TerminalCost) -> np.ndarray:
    qN, lamN = traj.q[-1], traj.lam[-1]
    qdotN, lamdotN = traj.qdot[-1], traj.lamdot[-1]
    return np.concatenate([phi.grad_q(qN, qdotN) - lamdotN, phi.grad_v(qN, qdotN) + lamN])


def objective_of(traj: DiscreteTrajectory, phi: TerminalCost) -> float:
    """phi at the final node plus the trapezoidal rule for int |u|^2 / 2, u = lam."""
    running = 0.5 * np.sum(traj.u**2, axis=1)
    h = traj.grid.h
    integral = h * (running.sum() - 0.5 * (running[0] + running[-1]))
    return phi(traj.q[-1], traj.qdot[-1]) + float(integral)


def _integrate(problem: Problem, grid: Grid, z: np.ndarray, opts: ShootOptions) -> DiscreteTrajectory:
    n = problem.n
    y0 = CombinedState(problem.q0, z[:n])
    ydot0 = CombinedVelocity(problem.v0, z[n:])
    return integrate_ivp(y0, ydot0, grid, problem.force, opts.method, opts.newton)


def shoot(problem: Problem, grid: Grid, guess: Optional[ShootingUnknown] = None,
          opts: ShootOptions = ShootOptions()) -> ShootingResult:
    """Damped Newton iteration on z -> terminal_residual(integrate(z)).

    The sensitivity matrix is built by central differences; step lengths
    are chosen by Armijo backtracking on |r|^2 / 2. Returns the best iterate
    seen, flagged ``converged`` when its residual is within ``opts.tol``.
    """
    n = problem.n
    z = (guess or ShootingUnknown.zeros(n)).as_array()
    if z.shape[0] != 2 * n:
        raise OCPError(f"guess has {z.shape[0] // 2} components, problem has {n}")
    phi = problem.phi

    traj = _integrate(problem, grid, z, opts)
    r = terminal_residual(traj, phi)
    rnorm = float(np.max(np.abs(r)))
    history = [rnorm]
    iterations = 0
    message = ""
    while rnorm > opts.tol:
        if iterations >= opts.max_iter:
            message = f"iteration cap {opts.max_iter} reached"
            break
        jac = np.empty((2 * n, 2 * n))
        for j in range(2 * n):
            delta = opts.fd_step * max(1.0, abs(z[j]))
            zp, zm = z.copy(), z.copy()
            zp[j] += delta
            zm[j] -= delta
            rp = terminal_residual(_integrate(problem, grid, zp, opts), phi)
            rm = terminal_residual(_integrate(problem, grid, zm, opts), phi)
            jac[:, j] = (rp - rm) / (2 * delta)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]

        merit = 0.5 * float(r @ r)
        alpha = 1.0
        accepted = False
        for _ in range(opts.max_halvings + 1):
            z_try = z + alpha * step
            try:
                traj_try = _integrate(problem, grid, z_try, opts)
            except (ConvergenceError, IntegrationError, SingularityError) as exc:
                log.debug("trial step alpha=%g failed: %s", alpha, exc)
                alpha *= 0.5
                continue
            r_try = terminal_residual(traj_try, phi)
            if 0.5 * float(r_try @ r_try) <= (1.0 - 2.0 * opts.armijo * alpha) * merit:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            message = "line search failed"
            break
        z, traj, r = z_try, traj_try, r_try
        rnorm = float(np.max(np.abs(r)))
        iterations += 1
        history.append(rnorm)
        log.debug("shoot iteration %d: residual %.3e (alpha %g)", iterations, rnorm, alpha)

    converged = rnorm <= opts.tol
    return ShootingResult(
        unknown=ShootingUnknown.from_array(z),
        trajectory=traj,
        residual_norm=rnorm,
        objective=objective_of(traj, phi),
        iterations=iterations,
        converged=converged,
        history=history,
        message="converged" if converged else message,
    )


def shoot_multistart(problem: Problem, grid: Grid, guess: Optional[ShootingUnknown] = None,
                     starts: int = 1, seed: int = 0, scale: float = 1.0,
                     opts: ShootOptions = ShootOptions()) -> ShootingResult:
    """Run :func:`shoot` from ``guess`` and then from random normal guesses.

    Stops at the first converged start; otherwise returns the start with the
    smallest residual. Deterministic for a given seed.
    """
    if starts < 1:
        raise OCPError("multi-start count must be at least 1")
    rng = np.random.default_rng(seed)
    n = problem.n
    best = None
    for i in range(starts):
        start = guess if i == 0 else ShootingUnknown.from_array(scale * rng.standard_normal(2 * n))
        try:
            result = shoot(problem, grid, start, opts)
        except (ConvergenceError, IntegrationError, SingularityError) as exc:
            if starts == 1:
                raise
            log.info("start %d failed: %s", i, exc)
            continue
        if best is None or result.residual_norm < best.residual_norm:
            best = result
        if result.converged:
            break
    if best is None:
        raise IntegrationError("every shooting start failed to integrate")
    return best
