"""Lagrangian and Hamiltonian objects of the state-adjoint formulation.

Coordinates: configuration q, adjoint lam, combined point y = (q, lam) and
velocity ydot = (qdot, lamdot). The combined Lagrangian

    L(y, ydot) = -lamdot.qdot - lam.f(q) - |lam|^2 / 2

is regular, with momenta p_q = -lamdot and p_lam = -qdot. Its Euler-Lagrange
equations are q'' = f(q) + lam, lam'' = (df/dq)^T lam, and the optimal
control is u = lam.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from .errors import DimensionError, OCPError
from .model import ForceField


def _vec(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _same_dim(*pairs):
    arrays = [_vec(x, name) for name, x in pairs]
    n = arrays[0].shape[0]
    for (name, _), a in zip(pairs, arrays):
        if a.shape[0] != n:
            raise DimensionError(f"{name} has length {a.shape[0]}, expected {n}")
    return arrays


def _check_force(force: ForceField, n: int):
    if force.dim != n:
        raise DimensionError(f"point has dimension {n}, force field has {force.dim}")


def _finite(obj, *arrays):
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise OCPError(f"{type(obj).__name__} entries must be finite")


@dataclass(frozen=True)
class CombinedState:
    q: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        q, lam = _same_dim(("q", self.q), ("lam", self.lam))
        _finite(self, q, lam)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam", lam)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.lam])

    @classmethod
    def from_array(cls, y) -> "CombinedState":
        y = np.asarray(y, dtype=float)
        n = y.shape[0] // 2
        return cls(y[:n], y[n:])


@dataclass(frozen=True)
class CombinedVelocity:
    qdot: np.ndarray
    lamdot: np.ndarray

    def __post_init__(self):
        qdot, lamdot = _same_dim(("qdot", self.qdot), ("lamdot", self.lamdot))
        _finite(self, qdot, lamdot)
        object.__setattr__(self, "qdot", qdot)
        object.__setattr__(self, "lamdot", lamdot)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.qdot, self.lamdot])


@dataclass(frozen=True)
class PhasePoint:
    """Canonical point (y, p_q, p_lam) of the combined Hamiltonian system."""

    y: CombinedState
    p_q: np.ndarray
    p_lam: np.ndarray

    def __post_init__(self):
        p_q, p_lam = _same_dim(("p_q", self.p_q), ("p_lam", self.p_lam))
        if p_q.shape[0] != self.y.n:
            raise DimensionError(f"momenta have length {p_q.shape[0]}, state has {self.y.n}")
        _finite(self, p_q, p_lam)
        object.__setattr__(self, "p_q", p_q)
        object.__setattr__(self, "p_lam", p_lam)

    @property
    def n(self) -> int:
        return self.y.n

    def as_array(self) -> np.ndarray:
        """Flat phase vector ordered (q, lam, p_q, p_lam)."""
        return np.concatenate([self.y.q, self.y.lam, self.p_q, self.p_lam])

    @classmethod
    def from_array(cls, z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        n = z.shape[0] // 4
        return cls(CombinedState(z[:n], z[n : 2 * n]), z[2 * n : 3 * n], z[3 * n :])


@dataclass(frozen=True)
class PMPPoint:
    """Point of the first-order PMP system with multiplier lam_0 = -1."""

    q: np.ndarray
    v: np.ndarray
    lam_q: np.ndarray
    lam_v: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        arrays = _same_dim(
            ("q", self.q), ("v", self.v), ("lam_q", self.lam_q), ("lam_v", self.lam_v), ("u", self.u)
        )
        for name, a in zip(("q", "v", "lam_q", "lam_v", "u"), arrays):
            object.__setattr__(self, name, a)


class PMPRates(NamedTuple):
    """Time derivatives supplied to :func:`pmp_residual`."""

    qdot: np.ndarray
    vdot: np.ndarray
    lam_q_dot: np.ndarray
    lam_v_dot: np.ndarray


# ---------------------------------------------------------------------------
# PMP and augmented-objective forms


def pmp_hamiltonian(p: PMPPoint, force: ForceField) -> float:
    _check_force(force, p.q.shape[0])
    return float(p.lam_q @ p.v + p.lam_v @ force.eval(p.q) + p.lam_v @ p.u - 0.5 * p.u @ p.u)


def pmp_residual(p: PMPPoint, derivs, force: ForceField) -> np.ndarray:
    """Stack of the five PMP conditions, zero on an extremal.

    Rows: qdot - v, vdot - f - u, lam_q_dot + (df/dq)^T lam_v,
    lam_v_dot + lam_q, u - lam_v.
    """
    n = p.q.shape[0]
    _check_force(force, n)
    d = PMPRates(*_same_dim(*zip(("qdot", "vdot", "lam_q_dot", "lam_v_dot"), derivs)))
    if d.qdot.shape[0] != n:
        raise DimensionError(f"derivatives have length {d.qdot.shape[0]}, point has {n}")
    return np.concatenate(
        [
            d.qdot - p.v,
            d.vdot - force.eval(p.q) - p.u,
            d.lam_q_dot + force.jacobian(p.q).T @ p.lam_v,
            d.lam_v_dot + p.lam_q,
            p.u - p.lam_v,
        ]
    )


def augmented_lagrangian(q, v, qdot, vdot, lam_q, lam_v, u, force: ForceField) -> float:
    q, v, qdot, vdot, lam_q, lam_v, u = _same_dim(
        ("q", q), ("v", v), ("qdot", qdot), ("vdot", vdot), ("lam_q", lam_q), ("lam_v", lam_v), ("u", u)
    )
    _check_force(force, q.shape[0])
    return float(0.5 * u @ u + lam_q @ (qdot - v) + lam_v @ (vdot - force.eval(q)) - lam_v @ u)


# ---------------------------------------------------------------------------
# hat-Lagrangian, flip and the combined Lagrangian


def hat_lagrangian(q, mu, v, lam, u, force: ForceField) -> float:
    """|u|^2/2 - mu.v - lam.(f(q) + u), the integrand after integrating lam.q'' by parts."""
    q, mu, v, lam, u = _same_dim(("q", q), ("mu", mu), ("v", v), ("lam", lam), ("u", u))
    _check_force(force, q.shape[0])
    return float(0.5 * u @ u - mu @ v - lam @ (force.eval(q) + u))


def flip_involution(q, mu, v, lam) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(q, mu, v, lam) -> (q, lam, v, mu)."""
    q, mu, v, lam = _same_dim(("q", q), ("mu", mu), ("v", v), ("lam", lam))
    return q, lam, v, mu


def new_lagrangian_u(y: CombinedState, ydot: CombinedVelocity, u, force: ForceField) -> float:
    """Combined Lagrangian before the control is eliminated."""
    u = _vec(u, "u")
    _check_force(force, y.n)
    return float(0.5 * u @ u - ydot.lamdot @ ydot.qdot - y.lam @ (force.eval(y.q) + u))


def new_lagrangian(y: CombinedState, ydot: CombinedVelocity, force: ForceField) -> float:
    _check_force(force, y.n)
    if ydot.qdot.shape[0] != y.n:
        raise DimensionError("velocity and state dimensions differ")
    return float(-ydot.lamdot @ ydot.qdot - y.lam @ force.eval(y.q) - 0.5 * y.lam @ y.lam)


def lagrangian_gradients(q, lam, qdot, lamdot, force: ForceField):
    """Partial derivatives (dL/dq, dL/dlam, dL/dqdot, dL/dlamdot) on raw arrays."""
    return (
        -force.jacobian(q).T @ lam,
        -force.eval(q) - lam,
        -lamdot,
        -qdot,
    )


def el_residual(y: CombinedState, ydot: CombinedVelocity, yddot: CombinedVelocity, force: ForceField) -> np.ndarray:
    """Euler-Lagrange residual [lam'' - (df/dq)^T lam ; q'' - f(q) - lam].

    ``yddot`` carries second derivatives in its ``qdot``/``lamdot`` slots.
    """
    _check_force(force, y.n)
    return np.concatenate(
        [
            yddot.lamdot - force.jacobian(y.q).T @ y.lam,
            yddot.qdot - force.eval(y.q) - y.lam,
        ]
    )


def pmp_point_from_combined(y: CombinedState, ydot: CombinedVelocity) -> PMPPoint:
    """Substitute v = qdot, lam_q = -lamdot, lam_v = lam, u = lam."""
    return PMPPoint(q=y.q, v=ydot.qdot, lam_q=-ydot.lamdot, lam_v=y.lam, u=y.lam)


# ---------------------------------------------------------------------------
# Legendre transform and the combined Hamiltonian


def legendre(y: CombinedState, ydot: CombinedVelocity) -> PhasePoint:
    if ydot.qdot.shape[0] != y.n:
        raise DimensionError("velocity and state dimensions differ")
    return PhasePoint(y, -ydot.lamdot, -ydot.qdot)


def legendre_inverse(pp: PhasePoint) -> Tuple[CombinedState, CombinedVelocity]:
    return pp.y, CombinedVelocity(qdot=-pp.p_lam, lamdot=-pp.p_q)


def new_hamiltonian(pp: PhasePoint, force: ForceField) -> float:
    _check_force(force, pp.n)
    lam = pp.y.lam
    return float(-pp.p_lam @ pp.p_q + lam @ force.eval(pp.y.q) + 0.5 * lam @ lam)


def hamilton_rhs(pp: PhasePoint, force: ForceField):
    """Canonical vector field: returns (ydot, (pdot_q, pdot_lam))."""
    _check_force(force, pp.n)
    dz = hamilton_vector_field(pp.as_array(), force)
    n = pp.n
    return CombinedVelocity(dz[:n], dz[n : 2 * n]), (dz[2 * n : 3 * n], dz[3 * n :])


def hamilton_vector_field(z: np.ndarray, force: ForceField) -> np.ndarray:
    """Same field on a flat phase vector (q, lam, p_q, p_lam)."""
    n = force.dim
    q, lam, p_q, p_lam = z[:n], z[n : 2 * n], z[2 * n : 3 * n], z[3 * n :]
    return np.concatenate([-p_lam, -p_q, -force.jacobian(q).T @ lam, -force.eval(q) - lam])
