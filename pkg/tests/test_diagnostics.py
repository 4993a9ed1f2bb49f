import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypbvp import cases
from hypbvp.characteristics import CharacteristicError
from hypbvp.diagnostics import (HypothesisVerdict, check_coupling_decay, check_dissipativity,
                                check_factorization, check_hyperbolicity, check_r_regularity,
                                check_smoothness, estimate_C_power_norm, residuals)
from hypbvp.grid import Domain, Grid, GridFunction
from hypbvp.problem import ProblemSpec, ReflectionTerm

from conftest import scalar_spec


def small(spec, T=2.0, nx=20, nt=80, depth=3):
    return Domain.build(spec, T, nx, nt, depth)


def counterexample_spec():
    return cases.counterexample(1).spec


def test_failing_verdict_needs_witness():
    with pytest.raises(ValueError):
        HypothesisVerdict("hyperbolicity", "fail", 0.0)
    v = HypothesisVerdict("hyperbolicity", "fail", -1.0, {"x": 0.5})
    assert "x=0.5" in v.line()


class TestHyperbolicity:
    def test_counterexample_second_speed(self):
        spec = counterexample_spec()
        v = check_hyperbolicity(spec, small(spec))
        assert v.status == "fail"
        assert v.witness["component"] == 2
        assert v.witness["a"] == pytest.approx(2 / math.pi)

    def test_opposite_speeds_pass(self):
        spec = ProblemSpec.build(2, 1, ["1", "-1"])
        assert check_hyperbolicity(spec, small(spec)).status == "pass"

    def test_sign_change_witness_near_zero(self):
        spec = scalar_spec("sin(t)")
        dom = Domain(2.0, 20, 400, 1, 2.0, 1.0)
        v = check_hyperbolicity(spec, dom)
        assert v.status == "fail"
        assert min(abs(v.witness["t"] - k * math.pi) for k in (-1, 0, 1)) < 0.02


class TestFactorization:
    def test_counterexample_fails(self):
        spec = counterexample_spec()
        v = check_factorization(spec, small(spec))
        assert v.status == "fail" and v.witness

    def test_no_coupling_passes(self):
        spec = ProblemSpec.build(2, 1, ["1", "-1"])
        assert check_factorization(spec, small(spec)).status == "pass"

    def test_supplied_factor(self):
        spec = ProblemSpec.build(2, 1, ["1 + 0.1*sin(t)", "-1"],
                                 b={(0, 1): "0.3*(-1 - (1 + 0.1*sin(t)))"}, btilde={(0, 1): "0.3"})
        assert check_factorization(spec, small(spec), tol=1e-12).status == "pass"

    def test_wrong_factor_fails(self):
        spec = ProblemSpec.build(2, 1, ["1", "-1"], b={(0, 1): "0.5"}, btilde={(0, 1): "0.3"})
        assert check_factorization(spec, small(spec)).status == "fail"


class TestCouplingDecay:
    def test_compact_cutoff_passes(self):
        b = "bump(t, -10, -5)*bump(-t, -10, -5)"
        spec = ProblemSpec.build(2, 1, ["1", "-1"], b={(0, 1): b}, btilde={(0, 1): "1"})
        dom = Domain.build(spec, 30.0, 20, 400)
        v = check_coupling_decay(spec, dom, 1e-9, window=10.0)
        assert v.status == "pass" and v.value == 0.0

    def test_counterexample_sup_one(self):
        spec = counterexample_spec()
        v = check_coupling_decay(spec, small(spec))
        assert v.status == "fail" and v.value == pytest.approx(1.0)

    def test_no_coupling(self):
        spec = ProblemSpec.build(2, 1, ["1", "-1"])
        v = check_coupling_decay(spec, small(spec))
        assert v.status == "pass" and v.value == 0.0


def test_smoothness_and_regularity():
    spec = ProblemSpec.build(1, 1, ["1 + 0.5*sin(t)"], b={(0, 0): "cos(x*t)"})
    assert check_smoothness(spec, small(spec)).status == "pass"
    bad = ProblemSpec.build(1, 1, ["1"], b={(0, 0): "1/x"})
    assert check_smoothness(bad, small(bad)).status == "fail"
    refl = scalar_spec(reflections={0: [ReflectionTerm(0, "0.5*cos(t)", 0.0, 1)]})
    assert check_r_regularity(refl, small(refl)).status == "pass"


class TestCPower:
    def test_zero_boundary_operator(self):
        spec = counterexample_spec()
        for ell in (1, 2):
            assert estimate_C_power_norm(spec, small(spec), ell) == 0.0

    def test_single_reflection(self):
        spec = scalar_spec(reflections={0: [ReflectionTerm(0, "-0.5", 0.0, 1)]})
        assert estimate_C_power_norm(spec, small(spec), 1) == pytest.approx(0.5, abs=1e-12)

    def test_circular_reflection(self):
        spec = ProblemSpec.build(2, 1, ["1", "-1"], reflections={
            0: [ReflectionTerm(1, "2", 0.0, 0)], 1: [ReflectionTerm(0, "0.3", 0.0, 1)]})
        dom = small(spec)
        assert estimate_C_power_norm(spec, dom, 1) == pytest.approx(2.0, abs=1e-12)
        assert estimate_C_power_norm(spec, dom, 2) == pytest.approx(0.6, abs=1e-12)

    def test_depth_guard(self):
        spec = scalar_spec(reflections={0: [ReflectionTerm(0, "0.5", 0.0, 1)]})
        with pytest.raises(CharacteristicError):
            estimate_C_power_norm(spec, small(spec, depth=1), 2)

    def test_monotone_in_probes(self):
        spec = scalar_spec("1 + 0.2*sin(t)", "0.3",
                           reflections={0: [ReflectionTerm(0, "0.5 + 0.2*cos(t)", 0.0, 1)]})
        dom = small(spec)
        values = [estimate_C_power_norm(spec, dom, 1, probes=p, candidates=0) for p in (0, 4, 16)]
        assert values[0] <= values[1] <= values[2]

    def test_dissipativity_verdicts(self):
        half = scalar_spec(reflections={0: [ReflectionTerm(0, "0.5", 0.0, 1)]})
        v = check_dissipativity(half, small(half))
        assert v.status == "pass" and v.details["ell"] == 1
        loud = cases.get("divergent").spec
        v = check_dissipativity(loud, small(loud), max_ell=3)
        assert v.status == "fail"
        assert v.details["estimates"][3] == pytest.approx(1.5 ** 3)


class TestResiduals:
    def test_transport_exact_small(self):
        case = cases.get("transport-pair")
        out = []
        for nx in (20, 40):
            g = Grid(nx, 4 * nx, -4.0, 4.0, 2.0)
            r = residuals(case.spec, GridFunction.sample(g, case.exact))
            out.append(r)
        assert out[1].pde < out[0].pde / 3.5
        assert out[1].bc < 1e-12 and out[1].int < 1e-12

    def test_counterexample_kernel(self):
        case = cases.counterexample(1)
        out = []
        for nx in (20, 40):
            g = Grid(nx, 4 * nx, -8.0, 8.0, 4.0)
            out.append(residuals(case.spec, GridFunction.sample(g, case.exact)))
        assert out[1].pde < out[0].pde / 3.5
        assert out[1].int < out[0].int / 3.5
        assert out[1].bc < 1e-12

    def test_zero_against_forcing(self):
        spec = scalar_spec(f="2*cos(t) + x")
        g = Grid(20, 80, -4.0, 4.0, 2.0)
        r = residuals(spec, GridFunction.zeros(g, 1))
        f = GridFunction.sample(g, spec.f).values[:, 1:-1, g.window_rows()]
        assert r.pde == pytest.approx(float(np.max(np.abs(f))), rel=1e-2)


@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_reflection_class_norm_is_max_row_sum(w):
    # three components, constant weights, undamped
    spec = ProblemSpec.build(3, 2, ["1", "1", "-1"], reflections={
        0: [ReflectionTerm(2, repr(w[0]), 0.0, 0), ReflectionTerm(1, repr(w[1]), 0.0, 0)],
        2: [ReflectionTerm(0, repr(w[2]), 0.0, 1)]})
    dom = small(spec, nx=8, nt=40)
    expected = max(abs(w[0]) + abs(w[1]), abs(w[2]))
    assert estimate_C_power_norm(spec, dom, 1) == pytest.approx(expected, abs=1e-12)
