import dataclasses

import numpy as np
import pytest

from synapsim.functions import affine, affine_clipped, constant, piecewise_linear
from synapsim.model import (Bounds, InvalidModelError, validate_spec, validated)

from conftest import dominating_drift_spec, simple_spec


def test_simple_model_is_valid():
    report = validate_spec(simple_spec(nu=0.1, beta0=0.5))
    assert report.ok, [str(v) for v in report.issues]


def test_zero_gamma_is_reported():
    spec = dataclasses.replace(simple_spec(), gamma=(0.0,))
    report = validate_spec(spec)
    assert not report.ok
    assert any(v.assumption == "gamma" and "positive" in v.message
               for v in report.issues)
    with pytest.raises(InvalidModelError):
        validated(spec)


def test_superlinear_beta_fails_growth_bound():
    # piecewise-linear overshoot of x^2: growth bound beta <= C_beta(1+|x|)
    xs = (-10.0, 0.0, 10.0, 1000.0)
    ys = (100.0, 0.0, 100.0, 1000000.0)
    spec = dataclasses.replace(simple_spec(), beta=piecewise_linear(xs, ys))
    report = validate_spec(spec)
    bad = [v for v in report.issues if v.assumption == "beta.growth"]
    assert bad and bad[0].probe is not None


def test_validation_is_pure_and_idempotent():
    spec = simple_spec()
    r1 = validate_spec(spec)
    r2 = validate_spec(spec)
    assert r1 == r2


def test_all_violations_reported_together():
    spec = dataclasses.replace(simple_spec(), gamma=(-1.0,), alpha=0.0)
    report = validate_spec(spec)
    names = {v.assumption for v in report.issues}
    assert {"gamma", "alpha"} <= names


@pytest.mark.parametrize("slope,ok", [(0.99, True), (1.01, False)])
def test_analytic_and_grid_beta_checks_agree(slope, ok):
    # C_beta = 1: affine-clipped slope above 1 must fail both ways
    spec = dataclasses.replace(
        simple_spec(), beta=affine_clipped(0.0, slope),
        bounds=Bounds(c_beta=0.0, C_beta=1.0, c_g=0.0, C_k=1.0, C_n=0.0, C_M=0.0))
    report = validate_spec(spec)
    grid_ok = not any(v.assumption == "beta.growth" for v in report.issues)
    analytic_ok = not any(v.assumption == "beta.growth_analytic"
                          for v in report.issues)
    assert grid_ok == ok and analytic_ok == ok


def test_constant_beta_needs_zero_value():
    # a positive constant never vanishes on the left tail; zero is fine
    ok = dataclasses.replace(simple_spec(), beta=constant(0.0))
    assert not any(v.assumption.startswith("beta")
                   for v in validate_spec(ok).issues)
    bad = dataclasses.replace(simple_spec(), beta=constant(0.5))
    names = {v.assumption for v in validate_spec(bad).issues}
    assert "beta.cutoff" in names or "beta.tail" in names


def test_g_must_stay_under_cap():
    spec = dataclasses.replace(simple_spec(), g=constant(0.5))  # c_g = 0
    report = validate_spec(spec)
    assert any(v.assumption == "g.cap" for v in report.issues)


def test_saturating_rejected_on_the_real_line():
    spec = dataclasses.replace(simple_spec(),
                               beta=dataclasses.replace(simple_spec().beta,
                                                        kind="saturating",
                                                        coeffs=(1.0,)))
    report = validate_spec(spec)
    assert any(v.assumption == "beta.domain" for v in report.issues)


def test_k_bound_checked_on_grid():
    spec = simple_spec(B2=2.0)
    spec = dataclasses.replace(
        spec, bounds=dataclasses.replace(spec.bounds, C_k=1.0))
    report = validate_spec(spec)
    assert any(v.assumption.startswith("k2[0].bounded") for v in report.issues)


def test_n_growth_bound():
    spec = dominating_drift_spec(C_n=0.5)
    bad = dataclasses.replace(
        spec, bounds=dataclasses.replace(spec.bounds, C_n=0.4))
    report = validate_spec(bad)
    assert any(v.assumption.endswith("growth") and v.assumption.startswith("n.")
               for v in report.issues)


def test_m_monotone_required():
    spec = dominating_drift_spec()
    bad = dataclasses.replace(spec, m_p=affine(1.0, -0.5))
    report = validate_spec(bad)
    assert any(v.assumption == "m_p.monotone" or v.assumption == "m_p.nonneg"
               for v in report.issues)


def test_dominating_shape_spec_is_valid(dominating_drift_model):
    assert dominating_drift_model.gamma_min == 1.0


def test_validated_model_evaluators(simple_model):
    m = simple_model
    assert m.beta(2.0) == pytest.approx(2.0)
    assert m.beta(-1.0) == 0.0
    assert np.allclose(m.k2_vec(np.array([3.0])), [1.0])
    assert m.w_jump(np.array([2.5])) == pytest.approx(2.5)
    assert m.post_envelope(-3.0) == pytest.approx(4.0)
