"""Run configuration: a strict TOML schema for the command-line front end."""
from __future__ import annotations

import math
from pathlib import Path
from typing import List, Literal, Optional

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .bvp import ShootingUnknown, ShootOptions
from .diagnostics import SymmetryGenerator
from .direct import DirectOptions
from .errors import ConfigError, OCPError
from .integrator import Grid, NewtonOptions
from .model import Problem, builtin_problem

Vector = List[float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("*", mode="after")
    @classmethod
    def _finite(cls, value, info):
        def bad(x):
            return isinstance(x, float) and not math.isfinite(x)

        flat = value if isinstance(value, list) else [value]
        for x in flat:
            if bad(x) or (isinstance(x, list) and any(bad(y) for y in x)):
                raise ValueError(f"{info.field_name} must be finite")
        return value


class TerminalBlock(_Strict):
    w_q: float = Field(0.0, ge=0)
    w_v: float = Field(0.0, ge=0)
    q_T: Optional[Vector] = None
    v_T: Optional[Vector] = None


class ProblemBlock(_Strict):
    name: Literal["linear", "spring", "central", "doublewell"]
    n: Optional[int] = Field(None, ge=1)
    A: Optional[List[Vector]] = None
    k: Optional[float] = None
    mu: Optional[float] = None
    q0: Vector
    v0: Vector
    T: float = Field(gt=0)
    terminal: TerminalBlock = TerminalBlock()
    symmetry_plane: Optional[List[int]] = None
    symmetry_axis: Optional[Vector] = None

    @model_validator(mode="after")
    def _check(self):
        n = self.n if self.n is not None else len(self.q0)
        for key in ("q0", "v0"):
            if len(getattr(self, key)) != n:
                raise ValueError(f"problem.{key} must have length n={n}")
        for key in ("q_T", "v_T"):
            value = getattr(self.terminal, key)
            if value is not None and len(value) != n:
                raise ValueError(f"problem.terminal.{key} must have length n={n}")
        required = {"linear": "A", "spring": "k", "central": "mu"}.get(self.name)
        if required and getattr(self, required) is None:
            raise ValueError(f"problem.{required} is required for problem {self.name!r}")
        for key in ("A", "k", "mu"):
            if key != required and getattr(self, key) is not None:
                raise ValueError(f"problem.{key} is not a parameter of problem {self.name!r}")
        if self.symmetry_plane is not None and self.symmetry_axis is not None:
            raise ValueError("give at most one of problem.symmetry_plane and problem.symmetry_axis")
        return self


class GridBlock(_Strict):
    N: int = Field(ge=1)


class SolverBlock(_Strict):
    method: Literal["variational", "rk4"] = "variational"
    tol: float = Field(1e-9, gt=0)
    max_iter: int = Field(50, ge=0)
    fd_step: float = Field(1e-3, gt=0)
    newton_tol: float = Field(1e-12, gt=0)
    newton_max_iter: int = Field(25, ge=1)
    guess_lam0: Optional[Vector] = None
    guess_lamdot0: Optional[Vector] = None
    multistart: int = Field(1, ge=1)
    multistart_scale: float = Field(1.0, gt=0)
    seed: int = 0


class DirectBlock(_Strict):
    gtol: float = Field(1e-8, gt=0)
    max_iter: int = Field(500, ge=1)
    history: int = Field(10, ge=1)
    fd_step: float = Field(1e-6, gt=0)
    gradient: Literal["fd", "adjoint"] = "fd"


class OutputBlock(_Strict):
    csv: Optional[str] = None
    precision: int = Field(17, ge=1, le=17)


class VerifyBlock(_Strict):
    del_tol: float = Field(1e-9, gt=0)
    pmp_tol: float = Field(1e-3, gt=0)
    hamiltonian_tol: float = Field(1e-4, gt=0)
    noether_tol: float = Field(1e-9, gt=0)
    symplectic_tol: float = Field(1e-6, gt=0)
    fd_increment: float = Field(1e-5, gt=0)
    strict_del: bool = False


class RunConfig(_Strict):
    problem: ProblemBlock
    grid: GridBlock
    solver: SolverBlock = SolverBlock()
    direct: DirectBlock = DirectBlock()
    output: OutputBlock = OutputBlock()
    verify: VerifyBlock = VerifyBlock()

    def build_problem(self) -> Problem:
        p = self.problem
        params = {"q0": p.q0, "v0": p.v0, "T": p.T, "w_q": p.terminal.w_q, "w_v": p.terminal.w_v}
        for key in ("n", "A", "k", "mu"):
            if getattr(p, key) is not None:
                params[key] = getattr(p, key)
        for key in ("q_T", "v_T"):
            if getattr(p.terminal, key) is not None:
                params[key] = getattr(p.terminal, key)
        try:
            return builtin_problem(p.name, params)
        except OCPError as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def build_grid(self) -> Grid:
        return Grid(self.problem.T, self.grid.N)

    def newton_options(self) -> NewtonOptions:
        return NewtonOptions(tol=self.solver.newton_tol, max_iter=self.solver.newton_max_iter)

    def shoot_options(self) -> ShootOptions:
        s = self.solver
        return ShootOptions(tol=s.tol, max_iter=s.max_iter, fd_step=s.fd_step, method=s.method,
                            newton=self.newton_options())

    def direct_options(self) -> DirectOptions:
        d = self.direct
        return DirectOptions(gtol=d.gtol, max_iter=d.max_iter, history=d.history, fd_step=d.fd_step,
                             gradient=d.gradient)

    def guess(self, n: int) -> ShootingUnknown:
        s = self.solver
        lam0 = s.guess_lam0 if s.guess_lam0 is not None else [0.0] * n
        lamdot0 = s.guess_lamdot0 if s.guess_lamdot0 is not None else [0.0] * n
        if len(lam0) != n or len(lamdot0) != n:
            raise ConfigError(f"solver.guess_lam0 and solver.guess_lamdot0 must have length n={n}")
        return ShootingUnknown(lam0, lamdot0)

    def symmetry(self, problem: Problem) -> Optional[SymmetryGenerator]:
        """Generator for the Noether column; a default plane rotation when the field is symmetric."""
        p = self.problem
        n = problem.n
        try:
            if p.symmetry_axis is not None:
                if n != 3:
                    raise ConfigError("problem.symmetry_axis needs n = 3")
                return SymmetryGenerator.from_axis(p.symmetry_axis)
            if p.symmetry_plane is not None:
                if len(p.symmetry_plane) != 2:
                    raise ConfigError("problem.symmetry_plane must list two coordinate indices")
                return SymmetryGenerator.plane(n, *p.symmetry_plane)
        except OCPError as exc:
            raise ConfigError(str(exc)) from exc
        if problem.force.equivariance_tag != "none" and n >= 2:
            return SymmetryGenerator.plane(n, 0, 1)
        return None


def _format_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"])
        lines.append(f"{loc}: {err['msg']}" if loc else err["msg"])
    return "; ".join(lines)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def load_config(path) -> RunConfig:
    try:
        with open(Path(path), "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return parse_config(data)
