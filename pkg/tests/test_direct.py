import numpy as np
import numpy.testing as npt
import pytest

from conftest import SPRING_B, SPRING_J, free_field
from lagocp.direct import (
    ControlGrid,
    DirectOptions,
    adjoint_gradient,
    discrete_objective,
    fd_gradient,
    optimize,
    simulate_state,
)
from lagocp.errors import OCPError
from lagocp.integrator import Grid
from lagocp.model import Problem, TerminalCost, builtin_problem


def free_problem(q0=0.0, v0=0.0, T=1.0, phi=None):
    return Problem(free_field(), phi or TerminalCost.zero(1), np.array([q0]), np.array([v0]), T)


def test_control_grid_validation():
    g = Grid(1.0, 4)
    assert ControlGrid(g, np.zeros(4)).u.shape == (4, 1)
    with pytest.raises(OCPError):
        ControlGrid(g, np.zeros(5))
    with pytest.raises(OCPError):
        ControlGrid(g, [0.0, np.nan, 0.0, 0.0])


def test_simulate_uncontrolled_cosine():
    p = builtin_problem("spring", dict(k=1.0, q0=[1.0], v0=[0.0], T=2 * np.pi))
    grid = Grid(2 * np.pi, 1000)
    q, v = simulate_state(p, ControlGrid.zeros(grid, 1))
    assert np.max(np.abs(q[:, 0] - np.cos(grid.nodes))) <= 1e-8
    assert np.max(np.abs(v[:, 0] + np.sin(grid.nodes))) <= 1e-8


def test_simulate_constant_control_polynomial():
    c, q0, v0, T = 0.7, 0.2, -0.5, 3.0
    grid = Grid(T, 9)
    q, v = simulate_state(free_problem(q0, v0, T), ControlGrid(grid, np.full(9, c)))
    t = grid.nodes
    npt.assert_allclose(v[:, 0], v0 + c * t, atol=1e-12)
    npt.assert_allclose(q[:, 0], q0 + v0 * t + 0.5 * c * t**2, atol=1e-12)


def test_single_step_grid():
    grid = Grid(1.0, 1)
    q, v = simulate_state(free_problem(0.0, 1.0), ControlGrid(grid, [2.0]))
    npt.assert_allclose([q[-1, 0], v[-1, 0]], [2.0, 3.0], atol=1e-14)


def test_objective_examples():
    grid = Grid(2.5, 10)
    assert discrete_objective(free_problem(T=2.5), ControlGrid.zeros(grid, 1)) == 0.0
    c = 1.2
    assert discrete_objective(free_problem(T=2.5), ControlGrid(grid, np.full(10, c))) == pytest.approx(0.5 * c**2 * 2.5, rel=1e-14)


def test_dimension_check(spring_regression):
    with pytest.raises(OCPError):
        simulate_state(spring_regression, ControlGrid(Grid(np.pi, 4), np.zeros((4, 2))))


def test_gradients_agree(doublewell_steering, rng):
    grid = Grid(doublewell_steering.T, 30)
    c = ControlGrid(grid, rng.normal(size=(30, 1)))
    fd = fd_gradient(doublewell_steering, c)
    adj = adjoint_gradient(doublewell_steering, c)
    npt.assert_allclose(adj, fd, rtol=1e-5, atol=1e-8)


def test_gradients_agree_central(rng):
    p = builtin_problem("central", dict(mu=1.0, q0=[1.0, 0.0, 0.0], v0=[0.0, 1.0, 0.0], T=1.0,
                                        w_q=2.0, w_v=1.0, q_T=[0.0, 1.0, 0.0], v_T=[-1.0, 0.0, 0.0]))
    c = ControlGrid(Grid(1.0, 12), 0.3 * rng.normal(size=(12, 3)))
    npt.assert_allclose(adjoint_gradient(p, c), fd_gradient(p, c), rtol=1e-5, atol=1e-8)


def test_zero_cost_converges_immediately():
    p = builtin_problem("doublewell", dict(q0=[-1.0], v0=[0.0], T=1.0))
    result = optimize(p, Grid(1.0, 20))
    assert result.converged and result.iterations == 0
    assert result.objective == 0.0
    npt.assert_array_equal(result.controls.u, 0.0)


@pytest.mark.parametrize("gradient", ["fd", "adjoint"])
def test_spring_regression_direct(spring_regression, gradient):
    grid = Grid(np.pi, 200)
    result = optimize(spring_regression, grid, opts=DirectOptions(gradient=gradient))
    assert result.objective == pytest.approx(SPRING_J, rel=0.02)
    lam = SPRING_B * np.sin(grid.nodes[:-1])
    assert np.max(np.abs(result.controls.u[:, 0] - lam)) <= 0.05


def test_control_error_shrinks_under_refinement(spring_regression):
    errors = []
    for N in (25, 50, 100):
        grid = Grid(np.pi, N)
        result = optimize(spring_regression, grid, opts=DirectOptions(gradient="adjoint"))
        errors.append(np.max(np.abs(result.controls.u[:, 0] - SPRING_B * np.sin(grid.nodes[:-1]))))
    order = np.log2(errors[0] / errors[1]), np.log2(errors[1] / errors[2])
    assert min(order) >= 0.9


def test_objective_history_monotone(doublewell_steering):
    result = optimize(doublewell_steering, Grid(doublewell_steering.T, 40), opts=DirectOptions(gradient="adjoint"))
    hist = np.array(result.objective_history)
    assert len(hist) > 2
    assert np.all(np.diff(hist) <= 1e-12 * (1 + np.abs(hist[:-1])))


def test_optimize_rejects_bad_options(spring_regression):
    with pytest.raises(OCPError):
        optimize(spring_regression, Grid(np.pi, 4), opts=DirectOptions(gradient="exact"))
    with pytest.raises(OCPError):
        optimize(spring_regression, Grid(np.pi, 4), init=ControlGrid.zeros(Grid(np.pi, 5), 1))
