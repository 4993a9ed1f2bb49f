import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypbvp.characteristics import (DomainExitError, HyperbolicityError, domega_dt, domega_dx,
                                    trace, trace_to)
from hypbvp.problem import ProblemSpec

from conftest import scalar_spec

NODES = np.linspace(0.0, 1.0, 11)


def test_constant_speed_closed_form():
    spec = scalar_spec("2/pi")
    path = trace(spec, 0, 0.5, 0.0, NODES)
    assert np.allclose(path.omega, (math.pi / 2) * (path.xi - 0.5), atol=1e-14)
    assert path.at(1.0) == pytest.approx(0.7853981634, abs=1e-10)
    assert path.at(0.5) == 0.0


def test_unit_speed():
    path = trace(scalar_spec("1"), 0, 0.0, 3.0, NODES)
    assert path.at(1.0) == pytest.approx(4.0, abs=1e-14)


def test_variable_speed_against_ode_oracle():
    # frozen from a DOP853 integration with rtol 1e-13
    oracle = 0.472597255271434
    spec = scalar_spec("2 + 0.5*sin(t)")
    path = trace(spec, 0, 0.0, 0.0, np.linspace(0, 1, 101))
    assert path.at(1.0) == pytest.approx(oracle, abs=1e-8)


def test_anchor_is_exact_and_monotone():
    spec = ProblemSpec.build(2, 1, ["1 + 0.3*sin(t + x)", "-1 - 0.2*cos(t)"])
    for j, slope in ((0, 1), (1, -1)):
        path = trace(spec, j, 0.37, 1.1, NODES)
        assert path.at(0.37) == 1.1
        assert np.all(slope * np.diff(path.omega) > 0)
        assert path.direction == slope


def test_hyperbolicity_and_exit_errors():
    with pytest.raises(HyperbolicityError):
        trace(scalar_spec("sin(t)"), 0, 0.5, 0.0, NODES)
    with pytest.raises(DomainExitError):
        trace(scalar_spec("1"), 0, 0.0, 0.0, NODES, t_bounds=(-0.5, 0.5))


def test_semigroup_error_is_fourth_order():
    spec = scalar_spec("1 + 0.8*sin(3*t + 2*x)^2")
    nodes = np.linspace(0, 1, 3)
    errors = []
    for sub in (1, 2, 4):
        forward = trace(spec, 0, 0.0, 0.2, nodes, substeps=sub)
        back = trace(spec, 0, 1.0, forward.at(1.0), nodes, substeps=sub)
        errors.append(abs(back.at(0.5) - forward.at(0.5)))
    assert errors[0] / errors[1] > 12
    assert errors[1] / errors[2] > 12


def test_displacement_bound():
    spec = scalar_spec("2 + 0.5*sin(t)")
    a_min = 1.5
    for t in np.linspace(-5, 5, 11):
        path = trace(spec, 0, 1.0, t, NODES)
        assert abs(path.at(0.0) - t) <= 1 / a_min


def test_derivative_formula_constant_speed():
    spec = ProblemSpec.build(2, 1, ["2/pi", "-1"])
    assert domega_dx(spec, 0, 0.2, 0.7, 1.0) == pytest.approx(-math.pi / 2, rel=1e-12)
    assert domega_dx(spec, 1, 0.9, 0.1, -2.0) == pytest.approx(1.0, rel=1e-12)
    assert domega_dt(spec, 0, 0.2, 0.7, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_domega_dt_is_one_at_anchor(variable_speed):
    assert domega_dt(variable_speed, 0, 0.4, 0.4, 2.0) == 1.0


def _fd(spec, xi, x, t, which, h=1e-5):
    if which == "x":
        plus, minus = trace_to(spec, 0, xi, x + h, t, 400), trace_to(spec, 0, xi, x - h, t, 400)
    else:
        plus, minus = trace_to(spec, 0, xi, x, t + h, 400), trace_to(spec, 0, xi, x, t - h, 400)
    return (plus - minus) / (2 * h)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.floats(0, 1), st.floats(0.05, 0.95), st.floats(-4, 4))
def test_derivatives_match_finite_differences(xi, x, t):
    spec = scalar_spec("2 + 0.5*sin(t)")
    for which, fn in (("x", domega_dx), ("t", domega_dt)):
        exact = fn(spec, 0, xi, x, t)
        assert exact == pytest.approx(_fd(spec, xi, x, t, which), rel=1e-4)
