"""Optimal control of control-affine mechanical systems through a regular
state-adjoint Lagrangian, its variational integrator and shooting solver."""

__version__ = "0.1.0"

from .bvp import ShootingResult, ShootingUnknown, ShootOptions, objective_of, shoot, terminal_residual
from .diagnostics import SymmetryGenerator, drift_report, noether_momentum, symplecticity_check
from .direct import ControlGrid, DirectOptions, DirectResult, optimize
from .forms import CombinedState, CombinedVelocity, PhasePoint, PMPPoint
from .integrator import DiscreteTrajectory, Grid, NewtonOptions, integrate_ivp
from .model import ForceField, Problem, TerminalCost, builtin_problem

__all__ = [
    "CombinedState",
    "CombinedVelocity",
    "ControlGrid",
    "DirectOptions",
    "DirectResult",
    "DiscreteTrajectory",
    "ForceField",
    "Grid",
    "NewtonOptions",
    "PMPPoint",
    "PhasePoint",
    "Problem",
    "ShootOptions",
    "ShootingResult",
    "ShootingUnknown",
    "SymmetryGenerator",
    "TerminalCost",
    "builtin_problem",
    "drift_report",
    "integrate_ivp",
    "noether_momentum",
    "objective_of",
    "optimize",
    "shoot",
    "symplecticity_check",
    "terminal_residual",
]
