"""Time stepping for the combined state-adjoint system.

The variational method uses the midpoint discrete Lagrangian

    L_d(a, b) = h * L((a + b)/2, (b - a)/h)

in position-momentum form: p_k = -D1 L_d(y_k, y_{k+1}) is solved for
y_{k+1} by Newton's method and p_{k+1} = D2 L_d(y_k, y_{k+1}) follows
explicitly. The resulting map is symplectic, and because midpoints and
differences commute with linear group actions it conserves the Noether
momentum of every orthogonal symmetry up to solver tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConvergenceError, IntegrationError, OCPError
from .forms import (
    CombinedState,
    CombinedVelocity,
    PhasePoint,
    hamilton_vector_field,
    lagrangian_gradients,
    legendre,
    new_lagrangian,
)
from .model import ForceField

METHODS = ("variational", "rk4")
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Grid:
    T: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise OCPError(f"grid needs N >= 1 steps, got {self.N}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise OCPError(f"grid horizon must be positive, got {self.T}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-12
    max_iter: int = 25
    max_halvings: int = 10


@dataclass(frozen=True)
class DiscreteTrajectory:
    """Node values of a combined trajectory.

    Arrays ``q``, ``lam``, ``p_q``, ``p_lam`` have shape ``(N + 1, n)``.
    Velocities are recovered from the momenta (qdot = -p_lam,
    lamdot = -p_q) and the control is u = lam.
    """

    grid: Grid
    q: np.ndarray
    lam: np.ndarray
    p_q: np.ndarray
    p_lam: np.ndarray
    method: str = "variational"

    def __post_init__(self):
        shape = (self.grid.N + 1, self.q.shape[1])
        for name in ("q", "lam", "p_q", "p_lam"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise OCPError(f"trajectory field {name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def u(self) -> np.ndarray:
        return self.lam

    @property
    def qdot(self) -> np.ndarray:
        return -self.p_lam

    @property
    def lamdot(self) -> np.ndarray:
        return -self.p_q

    def state(self, k: int) -> CombinedState:
        return CombinedState(self.q[k], self.lam[k])

    def phase_point(self, k: int) -> PhasePoint:
        return PhasePoint(self.state(k), self.p_q[k], self.p_lam[k])

    def phase_array(self) -> np.ndarray:
        return np.hstack([self.q, self.lam, self.p_q, self.p_lam])

    @classmethod
    def from_phase_array(cls, grid: Grid, Z: np.ndarray, method: str = "variational") -> "DiscreteTrajectory":
        n = Z.shape[1] // 4
        return cls(grid, Z[:, :n], Z[:, n : 2 * n], Z[:, 2 * n : 3 * n], Z[:, 3 * n :], method)


# ---------------------------------------------------------------------------
# discrete Lagrangian and its slot derivatives


def discrete_lagrangian(y_a: CombinedState, y_b: CombinedState, h: float, force: ForceField) -> float:
    if h <= 0:
        raise OCPError("step size must be positive")
    mid = CombinedState((y_a.q + y_b.q) / 2, (y_a.lam + y_b.lam) / 2)
    vel = CombinedVelocity((y_b.q - y_a.q) / h, (y_b.lam - y_a.lam) / h)
    return h * new_lagrangian(mid, vel, force)


def _slot_parts(a: np.ndarray, b: np.ndarray, h: float, force: ForceField):
    n = force.dim
    m = (a + b) / 2
    d = (b - a) / h
    gq, glam, gqd, glamd = lagrangian_gradients(m[:n], m[n:], d[:n], d[n:], force)
    return np.concatenate([gq, glam]), np.concatenate([gqd, glamd])


def d1_discrete_lagrangian(a: np.ndarray, b: np.ndarray, h: float, force: ForceField) -> np.ndarray:
    gy, gv = _slot_parts(a, b, h, force)
    return 0.5 * h * gy - gv


def d2_discrete_lagrangian(a: np.ndarray, b: np.ndarray, h: float, force: ForceField) -> np.ndarray:
    gy, gv = _slot_parts(a, b, h, force)
    return 0.5 * h * gy + gv


def _momentum_residual_jacobian(a, b, h, force):
    n = force.dim
    m = 0.5 * (a + b)
    mq, ml = m[:n], m[n:]
    J = force.jacobian(mq)
    eye = np.eye(n)
    top = np.hstack([0.25 * h * force.adjoint_derivative(mq, ml), -eye / h + 0.25 * h * J.T])
    bottom = np.hstack([-eye / h + 0.25 * h * J, 0.25 * h * eye])
    return np.vstack([top, bottom])


def solve_momentum_form(a: np.ndarray, p: np.ndarray, h: float, force: ForceField,
                        opts: NewtonOptions, guess: Optional[np.ndarray] = None) -> np.ndarray:
    """Find b with -D1 L_d(a, b) = p by damped Newton iteration."""
    if h <= 0:
        raise OCPError("step size must be positive")
    n = force.dim
    b = a + h * np.concatenate([-p[n:], -p[:n]]) if guess is None else np.array(guess, dtype=float)

    def residual(b):
        return -d1_discrete_lagrangian(a, b, h, force) - p

    r = residual(b)
    rnorm = np.max(np.abs(r))
    for it in range(opts.max_iter + 1):
        floor = 8 * _EPS * ((1.0 + np.max(np.abs(b))) / h + np.max(np.abs(p)))
        if rnorm <= max(opts.tol, floor):
            return b
        if it == opts.max_iter:
            break
        step = np.linalg.solve(_momentum_residual_jacobian(a, b, h, force), -r)
        alpha = 1.0
        for _ in range(opts.max_halvings):
            b_try = b + alpha * step
            r_try = residual(b_try)
            n_try = np.max(np.abs(r_try))
            if np.isfinite(n_try) and n_try < rnorm:
                break
            alpha *= 0.5
        b, r, rnorm = b_try, r_try, n_try
    raise ConvergenceError(
        f"discrete Euler-Lagrange solve did not converge (residual {rnorm:.3e})",
        residual=float(rnorm),
        iterations=opts.max_iter,
    )


def variational_step_array(z: np.ndarray, h: float, force: ForceField,
                           opts: NewtonOptions = NewtonOptions()) -> np.ndarray:
    """One step of the variational map on a flat phase vector (q, lam, p_q, p_lam)."""
    n2 = 2 * force.dim
    a, p = z[:n2], z[n2:]
    b = solve_momentum_form(a, p, h, force, opts)
    return np.concatenate([b, d2_discrete_lagrangian(a, b, h, force)])


def rk4_step_array(z: np.ndarray, h: float, force: ForceField) -> np.ndarray:
    k1 = hamilton_vector_field(z, force)
    k2 = hamilton_vector_field(z + 0.5 * h * k1, force)
    k3 = hamilton_vector_field(z + 0.5 * h * k2, force)
    k4 = hamilton_vector_field(z + h * k3, force)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# public steppers


def momentum_form_step(y_k: CombinedState, p_k: Sequence[np.ndarray], h: float, force: ForceField,
                       newton_opts: NewtonOptions = NewtonOptions()) -> Tuple[CombinedState, Tuple[np.ndarray, np.ndarray]]:
    """Advance (y_k, (p_q, p_lam)) by one variational step."""
    p = np.concatenate([np.asarray(p_k[0], dtype=float), np.asarray(p_k[1], dtype=float)])
    z = variational_step_array(np.concatenate([y_k.as_array(), p]), h, force, newton_opts)
    n = force.dim
    return CombinedState(z[:n], z[n : 2 * n]), (z[2 * n : 3 * n], z[3 * n :])


def del_step(y_prev: CombinedState, y_curr: CombinedState, h: float, force: ForceField,
             newton_opts: NewtonOptions = NewtonOptions()) -> CombinedState:
    """Solve D2 L_d(y_prev, y_curr) + D1 L_d(y_curr, y_next) = 0 for y_next."""
    a, b = y_prev.as_array(), y_curr.as_array()
    p = d2_discrete_lagrangian(a, b, h, force)
    c = solve_momentum_form(b, p, h, force, newton_opts, guess=2 * b - a)
    return CombinedState.from_array(c)


def integrate_ivp(y_0: CombinedState, ydot_0: CombinedVelocity, grid: Grid, force: ForceField,
                  method: str = "variational", newton_opts: NewtonOptions = NewtonOptions()) -> DiscreteTrajectory:
    """Integrate the combined Hamiltonian system from initial position and velocity."""
    if method not in METHODS:
        raise OCPError(f"unknown method {method!r}; expected one of {METHODS}")
    if y_0.n != force.dim:
        raise OCPError(f"initial state has dimension {y_0.n}, force has {force.dim}")
    h = grid.h
    Z = np.empty((grid.N + 1, 4 * force.dim))
    Z[0] = legendre(y_0, ydot_0).as_array()
    for k in range(grid.N):
        try:
            if method == "variational":
                Z[k + 1] = variational_step_array(Z[k], h, force, newton_opts)
            else:
                Z[k + 1] = rk4_step_array(Z[k], h, force)
        except ConvergenceError as exc:
            raise ConvergenceError(f"{exc} at node {k + 1}", exc.residual, exc.iterations) from exc
        except FloatingPointError as exc:
            raise IntegrationError(f"floating point failure at node {k + 1}", node=k + 1) from exc
        if not np.all(np.isfinite(Z[k + 1])):
            raise IntegrationError(f"non-finite state at node {k + 1}", node=k + 1)
    return DiscreteTrajectory.from_phase_array(grid, Z, method)


def del_residual(traj: DiscreteTrajectory, force: ForceField) -> float:
    """Largest interior residual of the discrete Euler-Lagrange chain."""
    if traj.grid.N + 1 < 3:
        raise OCPError("del_residual needs at least 3 nodes")
    Y = np.hstack([traj.q, traj.lam])
    h = traj.grid.h
    worst = 0.0
    for k in range(1, traj.grid.N):
        r = d2_discrete_lagrangian(Y[k - 1], Y[k], h, force) + d1_discrete_lagrangian(Y[k], Y[k + 1], h, force)
        worst = max(worst, float(np.max(np.abs(r))))
    return worst
