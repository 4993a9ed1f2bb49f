import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypbvp.characteristics import trace
from hypbvp.kernels import kernel_c, kernel_d, log_weights

from conftest import scalar_spec

NODES = np.linspace(0, 1, 21)


def test_c_is_one_without_damping():
    path = trace(scalar_spec("1 + 0.2*sin(t)"), 0, 0.6, 0.3, NODES)
    assert all(kernel_c(scalar_spec("1 + 0.2*sin(t)"), path, xi) == 1.0 for xi in NODES)


def test_c_constant_integrand():
    spec = scalar_spec("2", "1")
    path = trace(spec, 0, 1.0, 0.0, NODES)
    assert kernel_c(spec, path, 0.0) == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert kernel_c(spec, path, 1.0) == 1.0


def test_c_variable_against_quadrature_oracle(variable_speed):
    # frozen from a DOP853 integration of (omega, log c) with rtol 1e-13
    oracle_c, oracle_d = 0.600630810204793, 0.344178830998406
    path = trace(variable_speed, 0, 1.0, 0.0, np.linspace(0, 1, 20001), substeps=1)
    assert kernel_c(variable_speed, path, 0.0) == pytest.approx(oracle_c, abs=1e-8)
    assert kernel_d(variable_speed, path, 0.0) == pytest.approx(oracle_d, abs=1e-8)


def test_d_is_inverse_speed():
    for a, expected in (("2/pi", math.pi / 2), ("-1", -1.0)):
        spec = scalar_spec(a, m=1 if a[0] != "-" else 0)
        path = trace(spec, 0, 0.5, 0.0, NODES)
        for xi in (0.0, 0.5, 1.0):
            assert kernel_d(spec, path, xi) == pytest.approx(expected, rel=1e-14)


def test_sign_and_bound(variable_speed):
    a_min, bmax = 1.5, 1.0
    for t in np.linspace(-3, 3, 7):
        path = trace(variable_speed, 0, 0.8, t, NODES)
        for xi in NODES:
            c = kernel_c(variable_speed, path, xi)
            assert 0 < c <= math.exp(bmax / a_min)
            assert kernel_d(variable_speed, path, xi) > 0


@settings(max_examples=30, deadline=None, derandomize=True)
@given(st.integers(0, 20), st.integers(0, 20), st.integers(0, 20), st.floats(-3, 3))
def test_cocycle(iz, ixi, ix, t):
    spec = scalar_spec("2 + 0.5*sin(t)", "cos(t)")
    nodes = np.linspace(0, 1, 401)
    zeta, xi, x = NODES[iz], NODES[ixi], NODES[ix]
    outer = trace(spec, 0, x, t, nodes)
    inner = trace(spec, 0, xi, outer.at(xi), nodes)
    lhs = kernel_c(spec, outer, zeta)
    rhs = kernel_c(spec, inner, zeta) * kernel_c(spec, outer, xi)
    assert lhs == pytest.approx(rhs, rel=1e-5)


def test_log_weights_zero_at_anchor(variable_speed):
    path = trace(variable_speed, 0, 0.35, 1.0, NODES)
    assert log_weights(variable_speed, path)[path.index(0.35)] == 0.0
