"""Conserved quantities and structural checks along trajectories."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import OCPError
from .forms import (
    CombinedState,
    CombinedVelocity,
    PhasePoint,
    PMPPoint,
    new_hamiltonian,
    new_lagrangian,
    pmp_residual,
)
from .integrator import DiscreteTrajectory, Grid, NewtonOptions, variational_step_array
from .model import ForceField, Problem, as_vector, hat

SKEW_TOL = 1e-12
EXPM_TOL = 1e-13


@dataclass(frozen=True)
class SymmetryGenerator:
    """Skew-symmetric generator xi of the one-parameter group s -> exp(s xi)."""

    xi: np.ndarray
    axis: Optional[np.ndarray] = None

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
            raise OCPError(f"generator must be a square matrix, got shape {xi.shape}")
        if np.max(np.abs(xi + xi.T)) > SKEW_TOL * max(1.0, np.max(np.abs(xi))):
            raise OCPError("generator is not skew-symmetric")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @classmethod
    def from_axis(cls, axis) -> "SymmetryGenerator":
        a = as_vector(axis, 3, "axis")
        norm = np.linalg.norm(a)
        if norm == 0:
            raise OCPError("rotation axis must be nonzero")
        a = a / norm
        return cls(hat(a), a)

    @classmethod
    def plane(cls, n: int, i: int = 0, j: int = 1) -> "SymmetryGenerator":
        """Infinitesimal rotation in the (i, j) coordinate plane of R^n."""
        if not (0 <= i < n and 0 <= j < n and i != j):
            raise OCPError(f"invalid rotation plane ({i}, {j}) for n={n}")
        xi = np.zeros((n, n))
        xi[i, j], xi[j, i] = -1.0, 1.0
        return cls(xi)

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    def __add__(self, other: "SymmetryGenerator") -> "SymmetryGenerator":
        return SymmetryGenerator(self.xi + other.xi)

    def __rmul__(self, c: float) -> "SymmetryGenerator":
        return SymmetryGenerator(c * self.xi)

    def group_element(self, s: float) -> np.ndarray:
        return expm(s * self.xi)


def expm(A: np.ndarray, tol: float = EXPM_TOL) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a truncated Taylor series."""
    A = np.asarray(A, dtype=float)
    norm = np.max(np.sum(np.abs(A), axis=1)) if A.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = A / 2.0**squarings
    term = np.eye(A.shape[0])
    out = term.copy()
    for k in range(1, 30):
        term = term @ X / k
        out = out + term
        if np.max(np.abs(term)) <= tol * np.max(np.abs(out)):
            break
    for _ in range(squarings):
        out = out @ out
    return out


def noether_momentum(pp: PhasePoint, gen: SymmetryGenerator) -> float:
    """p_q.(xi q) + p_lam.(xi lam): momentum map of the lifted linear action."""
    if gen.n != pp.n:
        raise OCPError(f"generator acts on R^{gen.n}, phase point has n={pp.n}")
    return float(pp.p_q @ (gen.xi @ pp.y.q) + pp.p_lam @ (gen.xi @ pp.y.lam))


def _noether_rows(Z: np.ndarray, xi: np.ndarray) -> np.ndarray:
    n = xi.shape[0]
    q, lam, p_q, p_lam = Z[:, :n], Z[:, n : 2 * n], Z[:, 2 * n : 3 * n], Z[:, 3 * n :]
    return np.einsum("ki,ki->k", p_q, q @ xi.T) + np.einsum("ki,ki->k", p_lam, lam @ xi.T)


def lagrangian_violation(force: ForceField, g: np.ndarray, y: CombinedState, ydot: CombinedVelocity) -> float:
    """|L(g.(y, ydot)) - L(y, ydot)| / (1 + |L|) under (gq, g^-T lam, g qdot, g^-T lamdot)."""
    g_inv_T = np.linalg.inv(g).T
    moved_y = CombinedState(g @ y.q, g_inv_T @ y.lam)
    moved_v = CombinedVelocity(g @ ydot.qdot, g_inv_T @ ydot.lamdot)
    L0 = new_lagrangian(y, ydot, force)
    return abs(new_lagrangian(moved_y, moved_v, force) - L0) / (1.0 + abs(L0))


def lagrangian_invariance_check(force: ForceField, gen: SymmetryGenerator, trials: int = 100,
                                seed: int = 0, scale: float = 1.0) -> float:
    """Max violation of Lagrangian invariance over random points and s in [-pi, pi].

    ``scale`` multiplies every group element; any value other than 1 makes
    the action non-orthogonal and should break invariance.
    """
    if gen.n != force.dim:
        raise OCPError(f"generator acts on R^{gen.n}, force has dim {force.dim}")
    rng = np.random.default_rng(seed)
    n = force.dim
    worst = 0.0
    for _ in range(trials):
        q = rng.uniform(-2.0, 2.0, n)
        while np.linalg.norm(q) < 0.1:
            q = rng.uniform(-2.0, 2.0, n)
        y = CombinedState(q, rng.uniform(-2.0, 2.0, n))
        ydot = CombinedVelocity(rng.uniform(-2.0, 2.0, n), rng.uniform(-2.0, 2.0, n))
        g = scale * gen.group_element(rng.uniform(-np.pi, np.pi))
        worst = max(worst, lagrangian_violation(force, g, y, ydot))
    return worst


@dataclass(frozen=True)
class DriftReport:
    name: str
    values: np.ndarray
    drift: float
    grid: Grid


def drift_report(traj: DiscreteTrajectory, quantity: Union[str, SymmetryGenerator],
                 force: Optional[ForceField] = None) -> DriftReport:
    """Per-node values of H or a Noether momentum and the max deviation from node 0."""
    Z = traj.phase_array()
    if not np.all(np.isfinite(Z)):
        raise OCPError("trajectory has missing momenta")
    if isinstance(quantity, SymmetryGenerator):
        if quantity.n != traj.n:
            raise OCPError(f"generator acts on R^{quantity.n}, trajectory has n={traj.n}")
        name = "noether"
        values = _noether_rows(Z, quantity.xi)
    elif quantity == "hamiltonian":
        if force is None:
            raise OCPError("hamiltonian drift needs the force field")
        name = "hamiltonian"
        values = np.array([new_hamiltonian(traj.phase_point(k), force) for k in range(Z.shape[0])])
    else:
        raise OCPError(f"unknown drift quantity {quantity!r}")
    return DriftReport(name, values, float(np.max(np.abs(values - values[0]))), traj.grid)


def canonical_J(n: int) -> np.ndarray:
    """Symplectic matrix on R^{4n} for coordinates (y, p_y), y = (q, lam)."""
    m = 2 * n
    return np.block([[np.zeros((m, m)), np.eye(m)], [-np.eye(m), np.zeros((m, m))]])


def symplecticity_check(problem: Problem, h: float, probe_point: PhasePoint, fd_increment: float = 1e-5,
                        step: Optional[Callable[[np.ndarray, float, ForceField], np.ndarray]] = None,
                        newton_opts: NewtonOptions = NewtonOptions()) -> float:
    """Defect max|M^T J M - J| of the one-step map's central-difference Jacobian M.

    ``step`` maps a flat phase vector to the next one; defaults to the
    variational step.
    """
    if fd_increment <= 0:
        raise OCPError("finite-difference increment must be positive")
    force = problem.force
    if step is None:
        def step(z, h, force):
            return variational_step_array(z, h, force, newton_opts)
    z0 = probe_point.as_array()
    m = z0.shape[0]
    M = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = fd_increment
        M[:, j] = (step(z0 + e, h, force) - step(z0 - e, h, force)) / (2 * fd_increment)
    J = canonical_J(probe_point.n)
    return float(np.max(np.abs(M.T @ J @ M - J)))


def pmp_residual_along(traj: DiscreteTrajectory, force: ForceField) -> float:
    """Max-norm PMP residual over all nodes.

    Uses v = qdot, lam_q = -lamdot, lam_v = lam, u = lam with node velocities
    from the momenta; time derivatives are second-order finite differences
    (one-sided at the ends).
    """
    if traj.grid.N + 1 < 5:
        raise OCPError("pmp_residual_along needs at least 5 nodes")
    h = traj.grid.h
    q, v, lam_q, lam_v = traj.q, traj.qdot, -traj.lamdot, traj.lam

    def ddt(x):
        return np.gradient(x, h, axis=0, edge_order=2)

    rates = (ddt(q), ddt(v), ddt(lam_q), ddt(lam_v))
    worst = 0.0
    for k in range(q.shape[0]):
        point = PMPPoint(q[k], v[k], lam_q[k], lam_v[k], lam_v[k])
        r = pmp_residual(point, tuple(d[k] for d in rates), force)
        worst = max(worst, float(np.max(np.abs(r))))
    return worst
