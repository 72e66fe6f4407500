"""Optimal control problem instances: q'' = f(q) + u with quadratic control cost.

Force fields carry exact Jacobians because the adjoint equation needs
``(df/dq)^T lam`` exactly. ``eval`` accepts batched input of shape ``(..., n)``;
``jacobian`` takes a single point.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DimensionError, OCPError, SingularityError

EQUIVARIANCE_TAGS = ("none", "O(n)", "SO(3)")
CENTRAL_SINGULAR_RADIUS = 1e-9


def as_vector(x, n: Optional[int] = None, name: str = "vector") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class ForceField:
    """Conservative-style force f(q) with its exact Jacobian.

    Attributes
    ----------
    name : str
    dim : int
        Configuration dimension n.
    eval : callable
        ``q -> f(q)``; must broadcast over leading axes.
    jacobian : callable
        ``q -> df/dq`` as an ``(n, n)`` array.
    equivariance_tag : str
        One of ``"none"``, ``"O(n)"``, ``"SO(3)"``.
    adjoint_hessian : callable, optional
        ``(q, lam) -> d/dq [(df/dq)^T lam]``. Only used to speed up Newton
        solves; a central difference of ``jacobian`` is used when absent.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    equivariance_tag: str = "none"
    adjoint_hessian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DimensionError(f"force dimension must be a positive integer, got {self.dim}")
        if self.equivariance_tag not in EQUIVARIANCE_TAGS:
            raise OCPError(f"unknown equivariance tag {self.equivariance_tag!r}")
        if self.equivariance_tag == "SO(3)" and self.dim != 3:
            raise DimensionError("SO(3)-equivariant fields must have dim 3")

    def __call__(self, q):
        return self.eval(q)

    def adjoint_derivative(self, q: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Matrix d/dq [(df/dq)(q)^T lam]."""
        if self.adjoint_hessian is not None:
            return self.adjoint_hessian(q, lam)
        n = self.dim
        out = np.empty((n, n))
        scale = 1e-5 * max(1.0, float(np.max(np.abs(q))))
        for j in range(n):
            e = np.zeros(n)
            e[j] = scale
            out[:, j] = (self.jacobian(q + e).T @ lam - self.jacobian(q - e).T @ lam) / (2 * scale)
        return out


@dataclass(frozen=True)
class TerminalCost:
    """phi(q, v) = w_q/2 |q - q_T|^2 + w_v/2 |v - v_T|^2."""

    w_q: float
    w_v: float
    q_T: np.ndarray
    v_T: np.ndarray

    def __post_init__(self):
        if not (self.w_q >= 0 and self.w_v >= 0):
            raise OCPError("terminal-cost weights must be non-negative")
        q_T = as_vector(self.q_T, name="q_T")
        v_T = as_vector(self.v_T, q_T.shape[0], name="v_T")
        object.__setattr__(self, "w_q", float(self.w_q))
        object.__setattr__(self, "w_v", float(self.w_v))
        object.__setattr__(self, "q_T", _frozen(q_T))
        object.__setattr__(self, "v_T", _frozen(v_T))

    @classmethod
    def zero(cls, n: int) -> "TerminalCost":
        return cls(0.0, 0.0, np.zeros(n), np.zeros(n))

    @property
    def dim(self) -> int:
        return self.q_T.shape[0]

    @property
    def is_zero(self) -> bool:
        return self.w_q == 0.0 and self.w_v == 0.0

    def __call__(self, q, v) -> float:
        dq = np.asarray(q, dtype=float) - self.q_T
        dv = np.asarray(v, dtype=float) - self.v_T
        return 0.5 * self.w_q * float(dq @ dq) + 0.5 * self.w_v * float(dv @ dv)

    def grad_q(self, q, v) -> np.ndarray:
        return self.w_q * (np.asarray(q, dtype=float) - self.q_T)

    def grad_v(self, q, v) -> np.ndarray:
        return self.w_v * (np.asarray(v, dtype=float) - self.v_T)


@dataclass(frozen=True)
class Problem:
    """min phi(q(T), q'(T)) + int_0^T |u|^2/2 dt  s.t.  q'' = f(q) + u, q(0), q'(0) fixed."""

    force: ForceField
    phi: TerminalCost
    q0: np.ndarray
    v0: np.ndarray
    T: float

    def __post_init__(self):
        n = self.force.dim
        object.__setattr__(self, "q0", _frozen(as_vector(self.q0, n, "q0")))
        object.__setattr__(self, "v0", _frozen(as_vector(self.v0, n, "v0")))
        if self.phi.dim != n:
            raise DimensionError(f"terminal cost has dimension {self.phi.dim}, force has {n}")
        T = float(self.T)
        if not np.isfinite(T) or T <= 0:
            raise OCPError(f"horizon T must be finite and positive, got {self.T}")
        object.__setattr__(self, "T", T)
        if not (np.all(np.isfinite(self.q0)) and np.all(np.isfinite(self.v0))):
            raise OCPError("initial data must be finite")

    @property
    def n(self) -> int:
        return self.force.dim


# ---------------------------------------------------------------------------
# builtin fields


def linear_field(A) -> ForceField:
    A = _frozen(np.atleast_2d(np.asarray(A, dtype=float)))
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"linear field matrix must be square, got {A.shape}")
    n = A.shape[0]
    zero = np.zeros((n, n))
    return ForceField(
        name="linear",
        dim=n,
        eval=lambda q: np.asarray(q, dtype=float) @ A.T,
        jacobian=lambda q: A.copy(),
        adjoint_hessian=lambda q, lam: zero.copy(),
    )


def spring_field(k: float, n: int) -> ForceField:
    k = float(k)
    eye = np.eye(n)
    return ForceField(
        name="spring",
        dim=n,
        eval=lambda q: -k * np.asarray(q, dtype=float),
        jacobian=lambda q: -k * eye,
        equivariance_tag="O(n)",
        adjoint_hessian=lambda q, lam: np.zeros((n, n)),
    )


def _central_radius(q):
    r = np.linalg.norm(q, axis=-1)
    if np.any(r < CENTRAL_SINGULAR_RADIUS):
        raise SingularityError("central force evaluated at |q| < 1e-9")
    return r


def central_field(mu: float) -> ForceField:
    mu = float(mu)

    def f(q):
        q = np.asarray(q, dtype=float)
        r = _central_radius(q)
        return -mu * q / (r**3)[..., None]

    def jac(q):
        q = np.asarray(q, dtype=float)
        r = float(_central_radius(q))
        return -mu * (np.eye(3) / r**3 - 3.0 * np.outer(q, q) / r**5)

    def adjoint_hessian(q, lam):
        q = np.asarray(q, dtype=float)
        lam = np.asarray(lam, dtype=float)
        r = float(_central_radius(q))
        ql = q @ lam
        return -mu * (
            -3.0 * (np.outer(lam, q) + np.outer(q, lam) + ql * np.eye(3)) / r**5
            + 15.0 * ql * np.outer(q, q) / r**7
        )

    return ForceField(name="central", dim=3, eval=f, jacobian=jac, equivariance_tag="SO(3)",
                      adjoint_hessian=adjoint_hessian)


def doublewell_field(n: int) -> ForceField:
    def f(q):
        q = np.asarray(q, dtype=float)
        return -q * (q * q - 1.0)

    return ForceField(
        name="doublewell",
        dim=n,
        eval=f,
        jacobian=lambda q: np.diag(1.0 - 3.0 * np.asarray(q, dtype=float) ** 2),
        adjoint_hessian=lambda q, lam: np.diag(-6.0 * np.asarray(q, dtype=float) * np.asarray(lam, dtype=float)),
    )


BUILTIN_PROBLEMS = ("linear", "spring", "central", "doublewell")
_TERMINAL_KEYS = ("w_q", "w_v", "q_T", "v_T")
_COMMON_KEYS = ("n", "q0", "v0", "T") + _TERMINAL_KEYS
_CONSTANT_KEYS = {"linear": ("A",), "spring": ("k",), "central": ("mu",), "doublewell": ()}


def builtin_problem(name: str, params: Mapping) -> Problem:
    """Build one of the registered problems from a parameter mapping.

    Required keys: the field constant (``A``, ``k`` or ``mu``; none for
    ``doublewell``), ``q0``, ``v0`` and ``T``. ``n`` defaults to ``len(q0)``.
    Terminal-cost keys ``w_q, w_v, q_T, v_T`` default to zero.
    """
    if name not in _CONSTANT_KEYS:
        raise OCPError(f"unknown problem {name!r}; expected one of {BUILTIN_PROBLEMS}")
    allowed = set(_COMMON_KEYS) | set(_CONSTANT_KEYS[name])
    unknown = set(params) - allowed
    if unknown:
        raise OCPError(f"unknown parameters for {name}: {sorted(unknown)}")
    missing = [key for key in _CONSTANT_KEYS[name] + ("q0", "v0", "T") if key not in params]
    if missing:
        raise OCPError(f"missing parameters for {name}: {missing}")

    q0 = as_vector(params["q0"], name="q0")
    n = int(params.get("n", q0.shape[0]))
    if name == "linear":
        force = linear_field(params["A"])
    elif name == "spring":
        force = spring_field(params["k"], n)
    elif name == "central":
        force = central_field(params["mu"])
        if np.linalg.norm(q0) < CENTRAL_SINGULAR_RADIUS:
            raise SingularityError("central force problem needs q0 != 0")
    else:
        force = doublewell_field(n)
    if force.dim != n:
        raise DimensionError(f"{name}: field dimension {force.dim} does not match n={n}")

    phi = TerminalCost(
        w_q=params.get("w_q", 0.0),
        w_v=params.get("w_v", 0.0),
        q_T=as_vector(params.get("q_T", np.zeros(n)), n, "q_T"),
        v_T=as_vector(params.get("v_T", np.zeros(n)), n, "v_T"),
    )
    return Problem(force=force, phi=phi, q0=q0, v0=params["v0"], T=params["T"])


# ---------------------------------------------------------------------------
# equivariance


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues' formula for a rotation about a unit axis in R^3."""
    a = as_vector(axis, 3, "axis")
    a = a / np.linalg.norm(a)
    K = hat(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def hat(a) -> np.ndarray:
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def check_equivariance(force: ForceField, trials: int = 100, seed: int = 0) -> float:
    """Max of |f(gq) - g f(q)| / (1 + |f(q)|) over random group elements g and points q."""
    if force.equivariance_tag == "none":
        raise OCPError(f"force field {force.name!r} declares no symmetry")
    rng = np.random.default_rng(seed)
    n = force.dim
    worst = 0.0
    for _ in range(trials):
        q = rng.uniform(-2.0, 2.0, n)
        while np.linalg.norm(q) < 0.1:
            q = rng.uniform(-2.0, 2.0, n)
        if force.equivariance_tag == "SO(3)":
            axis = rng.standard_normal(3)
            g = rotation_matrix(axis, rng.uniform(-np.pi, np.pi))
        else:
            g = random_orthogonal(n, rng)
        fq = force.eval(q)
        err = np.linalg.norm(force.eval(g @ q) - g @ fq) / (1.0 + np.linalg.norm(fq))
        worst = max(worst, float(err))
    return worst
