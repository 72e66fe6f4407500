import dataclasses

import numpy as np
import numpy.testing as npt
import pytest

from lagocp.errors import DimensionError, OCPError, SingularityError
from lagocp.model import (
    TerminalCost,
    builtin_problem,
    check_equivariance,
    rotation_matrix,
)

BASE = dict(v0=[0.0], T=1.0)


def all_builtins(n=2):
    return [
        builtin_problem("linear", dict(A=np.arange(n * n).reshape(n, n) - 1.5, q0=[1.0] * n, v0=[0.0] * n, T=1.0)),
        builtin_problem("spring", dict(k=2.5, q0=[1.0] * n, v0=[0.0] * n, T=1.0)),
        builtin_problem("central", dict(mu=1.7, q0=[1.0, 0.5, 0.0], v0=[0.0, 1.0, 0.0], T=1.0)),
        builtin_problem("doublewell", dict(q0=[-1.0] * n, v0=[0.0] * n, T=1.0)),
    ]


def test_spring_value():
    p = builtin_problem("spring", dict(k=1, n=1, q0=[0.0], **BASE))
    npt.assert_array_equal(p.force.eval(np.array([2.0])), [-2.0])


def test_central_value():
    p = builtin_problem("central", dict(mu=1, q0=[1.0, 0, 0], v0=[0, 0, 0], T=1.0))
    npt.assert_array_equal(p.force.eval(np.array([1.0, 0, 0])), [-1.0, 0, 0])


def test_doublewell_value():
    p = builtin_problem("doublewell", dict(n=1, q0=[0.0], **BASE))
    npt.assert_array_equal(p.force.eval(np.array([1.0])), [0.0])


def test_builtin_tags():
    tags = [p.force.equivariance_tag for p in all_builtins()]
    assert tags == ["none", "O(n)", "SO(3)", "none"]


@pytest.mark.parametrize("problem", all_builtins(2) + all_builtins(3), ids=lambda p: f"{p.force.name}-{p.n}")
def test_jacobian_matches_five_point_differences(problem, rng):
    force = problem.force
    n = force.dim
    for _ in range(100):
        q = rng.uniform(-2, 2, n)
        if force.name == "central" and np.linalg.norm(q) < 0.3:
            continue
        h = 1e-3
        fd = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            fd[:, j] = (-force.eval(q + 2 * e) + 8 * force.eval(q + e) - 8 * force.eval(q - e) + force.eval(q - 2 * e)) / (12 * h)
        J = force.jacobian(q)
        assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


@pytest.mark.parametrize("problem", all_builtins(2), ids=lambda p: p.force.name)
def test_adjoint_hessian_matches_jacobian_differences(problem, rng):
    force = problem.force
    fallback = dataclasses.replace(force, adjoint_hessian=None)
    for _ in range(10):
        q = rng.uniform(0.3, 2, force.dim)
        lam = rng.uniform(-2, 2, force.dim)
        npt.assert_allclose(force.adjoint_derivative(q, lam), fallback.adjoint_derivative(q, lam), atol=1e-7)


def test_eval_broadcasts_over_batches():
    for p in all_builtins(3):
        Q = np.array([[1.0, 0.5, 0.2], [0.3, -1.0, 0.7]])
        npt.assert_allclose(p.force.eval(Q), np.stack([p.force.eval(Q[0]), p.force.eval(Q[1])]))


def test_equivariance_spring_and_central():
    assert check_equivariance(builtin_problem("spring", dict(k=3, q0=[1.0] * 4, v0=[0.0] * 4, T=1)).force, 100, 1) <= 1e-12
    assert check_equivariance(builtin_problem("central", dict(mu=2, q0=[1.0, 0, 0], v0=[0, 0, 0], T=1)).force, 100, 1) <= 1e-12


def test_equivariance_is_deterministic():
    force = builtin_problem("spring", dict(k=3, q0=[1.0, 2.0], v0=[0.0, 0.0], T=1)).force
    assert check_equivariance(force, 20, 5) == check_equivariance(force, 20, 5)


def test_doublewell_breaks_rotation_symmetry():
    force = builtin_problem("doublewell", dict(q0=[0.0, 0.0], v0=[0.0, 0.0], T=1)).force
    forced = dataclasses.replace(force, equivariance_tag="O(n)")
    assert check_equivariance(forced, 20, 0) > 1e-3
    # 45 degree rotation of (1, 0): f(1, 0) = 0 but f(g q) = (1/sqrt8)(1, 1)
    c = np.sqrt(0.5)
    g = np.array([[c, -c], [c, c]])
    q = np.array([1.0, 0.0])
    violation = np.linalg.norm(force.eval(g @ q) - g @ force.eval(q)) / (1 + np.linalg.norm(force.eval(q)))
    assert violation == pytest.approx(0.5, rel=1e-12)


def test_equivariance_needs_a_tag():
    force = builtin_problem("doublewell", dict(q0=[0.0], v0=[0.0], T=1)).force
    with pytest.raises(OCPError):
        check_equivariance(force)


def test_rodrigues_is_rotation(rng):
    g = rotation_matrix(rng.standard_normal(3), 0.7)
    npt.assert_allclose(g.T @ g, np.eye(3), atol=1e-14)
    assert np.linalg.det(g) == pytest.approx(1.0)


def test_terminal_cost_gradients(rng):
    phi = TerminalCost(1.7, 0.4, rng.normal(size=3), rng.normal(size=3))
    for _ in range(20):
        q, v = rng.normal(size=3), rng.normal(size=3)
        h = 1e-5
        gq = [(phi(q + h * e, v) - phi(q - h * e, v)) / (2 * h) for e in np.eye(3)]
        gv = [(phi(q, v + h * e) - phi(q, v - h * e)) / (2 * h) for e in np.eye(3)]
        npt.assert_allclose(phi.grad_q(q, v), gq, rtol=1e-7, atol=1e-9)
        npt.assert_allclose(phi.grad_v(q, v), gv, rtol=1e-7, atol=1e-9)


def test_terminal_cost_nonnegative_and_zero_at_target(rng):
    q_T, v_T = rng.normal(size=2), rng.normal(size=2)
    phi = TerminalCost(2.0, 3.0, q_T, v_T)
    assert phi(q_T, v_T) == 0.0
    for _ in range(50):
        assert phi(rng.normal(size=2), rng.normal(size=2)) > 0.0
    assert TerminalCost.zero(2)(rng.normal(size=2), rng.normal(size=2)) == 0.0


def test_central_singularity():
    p = builtin_problem("central", dict(mu=1, q0=[1.0, 0, 0], v0=[0, 0, 0], T=1))
    with pytest.raises(SingularityError):
        p.force.eval(np.zeros(3))
    with pytest.raises(SingularityError):
        builtin_problem("central", dict(mu=1, q0=[0.0, 0, 0], v0=[0, 0, 0], T=1))


@pytest.mark.parametrize(
    "name, params, exc",
    [
        ("pendulum", dict(q0=[0.0], v0=[0.0], T=1), OCPError),
        ("spring", dict(q0=[0.0], v0=[0.0], T=1), OCPError),
        ("spring", dict(k=1, q0=[0.0], v0=[0.0, 1.0], T=1), DimensionError),
        ("spring", dict(k=1, q0=[0.0], v0=[0.0], T=-1), OCPError),
        ("spring", dict(k=1, q0=[0.0], v0=[0.0], T=float("inf")), OCPError),
        ("linear", dict(A=[[1.0, 2.0]], q0=[0.0], v0=[0.0], T=1), DimensionError),
        ("central", dict(mu=1, q0=[1.0, 0.0], v0=[0.0, 0.0], T=1), DimensionError),
        ("doublewell", dict(k=2, q0=[0.0], v0=[0.0], T=1), OCPError),
    ],
)
def test_builtin_errors(name, params, exc):
    with pytest.raises(exc):
        builtin_problem(name, params)


def test_problem_is_immutable(spring_regression):
    with pytest.raises(dataclasses.FrozenInstanceError):
        spring_regression.T = 2.0
    with pytest.raises(ValueError):
        spring_regression.q0[0] = 1.0
