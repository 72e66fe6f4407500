"""Direct transcription oracle: discretize the control, then optimize.

Controls are piecewise constant on the grid, the state ODE (q, v)' = (v, f(q) + u)
is integrated with classical RK4, and the discretized objective is minimized
with limited-memory BFGS. Nothing here depends on the adjoint formulation, so
the result is an independent check of the indirect solution (u* = lam).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, OCPError
from .integrator import Grid
from .model import Problem

GRADIENT_MODES = ("fd", "adjoint")


@dataclass(frozen=True)
class ControlGrid:
    grid: Grid
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if u.ndim != 2 or u.shape[0] != self.grid.N:
            raise OCPError(f"controls need shape (N, n) with N={self.grid.N}, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise OCPError("controls must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def zeros(cls, grid: Grid, n: int) -> "ControlGrid":
        return cls(grid, np.zeros((grid.N, n)))


@dataclass(frozen=True)
class DirectOptions:
    gtol: float = 1e-8
    max_iter: int = 500
    history: int = 10
    fd_step: float = 1e-6
    gradient: str = "fd"


@dataclass
class DirectResult:
    controls: ControlGrid
    q: np.ndarray
    v: np.ndarray
    objective: float
    gradient_norm: float
    iterations: int
    converged: bool
    message: str = ""
    objective_history: List[float] = field(default_factory=list)


def _rk4_batch(problem: Problem, h: float, U: np.ndarray):
    """Integrate a batch of control sequences U with shape (B, N, n).

    Returns q, v with shape (B, N + 1, n).
    """
    f = problem.force.eval
    B, N, n = U.shape
    q = np.empty((B, N + 1, n))
    v = np.empty((B, N + 1, n))
    q[:, 0] = problem.q0
    v[:, 0] = problem.v0
    for k in range(N):
        qk, vk, uk = q[:, k], v[:, k], U[:, k]
        k1q, k1v = vk, f(qk) + uk
        k2q, k2v = vk + 0.5 * h * k1v, f(qk + 0.5 * h * k1q) + uk
        k3q, k3v = vk + 0.5 * h * k2v, f(qk + 0.5 * h * k2q) + uk
        k4q, k4v = vk + h * k3v, f(qk + h * k3q) + uk
        q[:, k + 1] = qk + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        v[:, k + 1] = vk + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return q, v


def _check_controls(problem: Problem, controls: ControlGrid):
    if controls.u.shape[1] != problem.n:
        raise OCPError(f"controls have dimension {controls.u.shape[1]}, problem has {problem.n}")


def simulate_state(problem: Problem, controls: ControlGrid):
    """RK4 state trajectory (q, v), each of shape (N + 1, n)."""
    _check_controls(problem, controls)
    q, v = _rk4_batch(problem, controls.grid.h, controls.u[None])
    return q[0], v[0]


def _objectives(problem: Problem, h: float, U: np.ndarray) -> np.ndarray:
    q, v = _rk4_batch(problem, h, U)
    phi = problem.phi
    dq = q[:, -1] - phi.q_T
    dv = v[:, -1] - phi.v_T
    terminal = 0.5 * phi.w_q * np.sum(dq * dq, axis=1) + 0.5 * phi.w_v * np.sum(dv * dv, axis=1)
    return terminal + 0.5 * h * np.sum(U * U, axis=(1, 2))


def discrete_objective(problem: Problem, controls: ControlGrid) -> float:
    """phi(q_N, v_N) + sum_k h |u_k|^2 / 2."""
    _check_controls(problem, controls)
    return float(_objectives(problem, controls.grid.h, controls.u[None])[0])


def fd_gradient(problem: Problem, controls: ControlGrid, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of :func:`discrete_objective`, shape (N, n)."""
    _check_controls(problem, controls)
    u = controls.u
    N, n = u.shape
    m = N * n
    deltas = step * np.maximum(1.0, np.abs(u.ravel()))
    batch = np.repeat(u.ravel()[None], 2 * m, axis=0)
    idx = np.arange(m)
    batch[idx, idx] += deltas
    batch[m + idx, idx] -= deltas
    vals = _objectives(problem, controls.grid.h, batch.reshape(2 * m, N, n))
    return ((vals[:m] - vals[m:]) / (2 * deltas)).reshape(N, n)


def adjoint_gradient(problem: Problem, controls: ControlGrid) -> np.ndarray:
    """Exact gradient of :func:`discrete_objective` by reverse sweep through RK4."""
    _check_controls(problem, controls)
    f, jac = problem.force.eval, problem.force.jacobian
    u = controls.u
    h = controls.grid.h
    q, v = simulate_state(problem, controls)
    phi = problem.phi
    aq = phi.grad_q(q[-1], v[-1])
    av = phi.grad_v(q[-1], v[-1])
    grad = h * u.copy()

    def pull(qs, bq, bv):
        # transpose of d(v, f(q) + u)/d(q, v) applied to (bq, bv)
        return jac(qs).T @ bv, bq

    for k in range(u.shape[0] - 1, -1, -1):
        qk, vk, uk = q[k], v[k], u[k]
        k1q, k1v = vk, f(qk) + uk
        q2, v2 = qk + 0.5 * h * k1q, vk + 0.5 * h * k1v
        k2q, k2v = v2, f(q2) + uk
        q3, v3 = qk + 0.5 * h * k2q, vk + 0.5 * h * k2v
        k3q, k3v = v3, f(q3) + uk
        q4 = qk + h * k3q

        b4q, b4v = (h / 6) * aq, (h / 6) * av
        b3q, b3v = (h / 3) * aq, (h / 3) * av
        b2q, b2v = (h / 3) * aq, (h / 3) * av
        b1q, b1v = (h / 6) * aq, (h / 6) * av
        gq, gv = aq.copy(), av.copy()

        xq, xv = pull(q4, b4q, b4v)
        gq, gv = gq + xq, gv + xv
        b3q, b3v = b3q + h * xq, b3v + h * xv
        xq, xv = pull(q3, b3q, b3v)
        gq, gv = gq + xq, gv + xv
        b2q, b2v = b2q + 0.5 * h * xq, b2v + 0.5 * h * xv
        xq, xv = pull(q2, b2q, b2v)
        gq, gv = gq + xq, gv + xv
        b1q, b1v = b1q + 0.5 * h * xq, b1v + 0.5 * h * xv
        xq, xv = pull(qk, b1q, b1v)
        aq, av = gq + xq, gv + xv
        # u enters every stage additively in the v-rate
        gu = b1v + b2v + b3v + b4v
        grad[k] += gu
    return grad


def optimize(problem: Problem, grid: Grid, init: Optional[ControlGrid] = None,
             opts: DirectOptions = DirectOptions()) -> DirectResult:
    """Minimize the discretized objective over all N*n control values (L-BFGS)."""
    if opts.gradient not in GRADIENT_MODES:
        raise OCPError(f"unknown gradient mode {opts.gradient!r}")
    n = problem.n
    init = init or ControlGrid.zeros(grid, n)
    if init.grid != grid:
        raise OCPError("initial controls live on a different grid")
    _check_controls(problem, init)
    shape = init.u.shape
    history: List[float] = []

    def fun(x):
        c = ControlGrid(grid, x.reshape(shape))
        J = discrete_objective(problem, c)
        if opts.gradient == "fd":
            g = fd_gradient(problem, c, opts.fd_step)
        else:
            g = adjoint_gradient(problem, c)
        return J, g.ravel()

    x0 = init.u.ravel().copy()
    J0, g0 = fun(x0)
    history.append(J0)
    if np.max(np.abs(g0)) <= opts.gtol:
        q, v = simulate_state(problem, init)
        return DirectResult(init, q, v, J0, float(np.max(np.abs(g0))), 0, True, "initial point is stationary", history)

    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=lambda xk: history.append(discrete_objective(problem, ControlGrid(grid, xk.reshape(shape)))),
        options={"maxcor": opts.history, "gtol": opts.gtol, "ftol": 1e-16, "maxiter": opts.max_iter},
    )
    if not np.all(np.isfinite(res.x)):
        raise ConvergenceError("direct optimizer produced non-finite controls", iterations=res.nit)
    controls = ControlGrid(grid, res.x.reshape(shape))
    J, g = fun(res.x)
    gnorm = float(np.max(np.abs(g)))
    q, v = simulate_state(problem, controls)
    return DirectResult(
        controls=controls,
        q=q,
        v=v,
        objective=J,
        gradient_norm=gnorm,
        iterations=int(res.nit),
        converged=gnorm <= opts.gtol,
        message=str(res.message),
        objective_history=history,
    )
