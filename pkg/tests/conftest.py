import math

import numpy as np
import pytest

from lagocp.forms import hamilton_vector_field
from lagocp.model import ForceField, builtin_problem

# closed-form solution of the spring regression problem
# (k=1, q0=v0=0, T=pi, w_q=w_v=1, q_T=1, v_T=0): lam(t) = B sin t, J = 1/(2+pi)
SPRING_B = 2.0 / (2.0 + math.pi)
SPRING_LAM0 = 0.0
SPRING_LAMDOT0 = SPRING_B
SPRING_J = 1.0 / (2.0 + math.pi)

SPRING_REGRESSION = dict(k=1.0, q0=[0.0], v0=[0.0], T=math.pi, w_q=1.0, w_v=1.0, q_T=[1.0], v_T=[0.0])
DOUBLEWELL_STEERING = dict(q0=[-1.0], v0=[0.0], T=2.0, w_q=10.0, w_v=10.0, q_T=[1.0], v_T=[0.0])


def free_field(n=1):
    return ForceField("free", n, lambda q: 0.0 * np.asarray(q, dtype=float), lambda q: np.zeros((n, n)))


def explicit_euler_step(z, h, force):
    """Non-symplectic control method for symplecticity tests."""
    return z + h * hamilton_vector_field(z, force)


def spring_ivp_exact(t, q0, v0, lam0, lamdot0):
    """Exact solution of q'' = -q + lam, lam'' = -lam (resonant forcing)."""
    lam = lam0 * np.cos(t) + lamdot0 * np.sin(t)
    d = v0 + lamdot0 / 2
    q = q0 * np.cos(t) + d * np.sin(t) + lam0 / 2 * t * np.sin(t) - lamdot0 / 2 * t * np.cos(t)
    return q, lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spring_regression():
    return builtin_problem("spring", SPRING_REGRESSION)


@pytest.fixture
def doublewell_steering():
    return builtin_problem("doublewell", DOUBLEWELL_STEERING)


@pytest.fixture
def spring1():
    return builtin_problem("spring", dict(k=1.0, q0=[1.0], v0=[0.0], T=1.0))


@pytest.fixture
def doublewell1():
    return builtin_problem("doublewell", dict(q0=[-1.0], v0=[0.0], T=1.0))


SPRING_CONFIG = """
[problem]
name = "spring"
k = 1.0
q0 = [0.0]
v0 = [0.0]
T = 3.141592653589793

[problem.terminal]
w_q = 1.0
w_v = 1.0
q_T = [1.0]
v_T = [0.0]

[grid]
N = {N}
"""


@pytest.fixture
def spring_config(tmp_path):
    def make(N=400, extra=""):
        path = tmp_path / f"spring_{N}.toml"
        path.write_text(SPRING_CONFIG.format(N=N) + extra)
        return path

    return make
