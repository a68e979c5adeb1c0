import math

import numpy as np
import pytest

from synapsim.equilibrium import (LinearLimitCoefficients, cycle_average,
                                  default_windows, dominating_moments,
                                  dominating_psi, estimate_pi,
                                  simple_model_coefficients)
from synapsim.model import SystemState, validated
from synapsim.simulator import (POST, PRE, DominatingConstants, PolyFunctional,
                                dominating_model, simulate_fast)
from synapsim.util import replica_seeds

from conftest import simple_spec


@pytest.fixture(scope="module")
def dominating_fast_model():
    # fast block of the dominating system at (lam, C_k, C_beta, gamma) = 1
    cons = DominatingConstants(C_k=1.0, C_n=0.0, C_M=0.0, C_beta=1.0,
                               gamma_min=1.0, alpha=1.0)
    return dominating_model(cons, lam=1.0, ell=1)


def test_default_windows(simple_model):
    burnin, horizon = default_windows(simple_model)
    assert burnin == pytest.approx(20.0)
    assert horizon == pytest.approx(1000.0)


def test_frozen_zero_weight_gives_zero_drift(simple_model):
    # w = 0 with nu = 0: X stays at 0 and beta(X) = 0, so E[Z beta(X)] = 0
    est = estimate_pi(0.0, simple_model, horizon=200.0, burnin=10.0,
                      replicas=4, seed=1)
    assert est["zbeta"].mean == 0.0
    assert est["ex"].mean == 0.0


def test_zero_weight_post_rate_is_beta_at_zero():
    # nu > 0: X == 0, posts fire at constant rate beta(0) = nu
    spec = simple_spec(nu=0.5, beta0=1.0)
    m = validated(spec)
    n = 400
    T = 20.0
    counts = [len(simulate_fast(0.0, m, T, s).event_times(POST))
              for s in replica_seeds(501, n)]
    counts = np.array(counts, dtype=float)
    se = counts.std(ddof=1) / math.sqrt(n)
    assert abs(counts.mean() - 0.5 * T) <= 3 * se


def test_no_pre_spikes_when_lambda_zero():
    spec = simple_spec(lam=0.0)
    m = validated(spec)
    traj = simulate_fast(2.0, m, 10.0, 7,
                         u0=SystemState(3.0, np.zeros(1), 0.0, 0.0, 0.0))
    assert len(traj.event_times(PRE)) == 0
    assert len(traj.event_times(POST)) > 0  # decaying X still fires


def test_simple_model_stationary_mean_is_lam_w(simple_model):
    # time-average of X over [100, 1100] targets lam*w
    w = 1.0
    est = estimate_pi(w, simple_model, horizon=1100.0, burnin=100.0,
                      replicas=8, seed=502)
    assert est["ex"].within(1.0 * w)


def test_dominating_moments_closed_forms():
    assert dominating_moments(0.0, 1.0, 1.0, 1.0, 1.0)[:2] == (0.0, 0.0)
    ex, ex2, ez, exz = dominating_moments(1.0, 1.0, 1.0, 1.0, 1.0)
    assert (ex, ex2) == (1.0, 1.5)
    assert ez == pytest.approx(4.0)
    assert exz == pytest.approx(0.5 * (1.0 * (1 + 4.0) + 3.0 * 1.0 + 1.5))
    assert exz == pytest.approx(4.75)


def test_dominating_mc_matches_closed_moments(dominating_fast_model):
    est = estimate_pi(1.0, dominating_fast_model, replicas=16, seed=503)
    ex, ex2, ez, exz = dominating_moments(1.0, 1.0, 1.0, 1.0, 1.0)
    assert est["ex"].within(ex)
    assert est["ex2"].within(ex2)
    assert est["ez"].within(ez)
    assert est["exz"].within(exz)


def test_dominating_trace_balance(dominating_fast_model):
    # gamma E[Z] = C_k (1 + lam + C_beta (1 + lam w))
    w = 2.0
    est = estimate_pi(w, dominating_fast_model, horizon=600.0, burnin=20.0,
                      replicas=8, seed=504)
    target = 1.0 * (1 + 1 + 1 * (1 + w)) / 1.0
    assert est["ez"].within(target)


def test_simple_coefficients_examples():
    c = simple_model_coefficients(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    assert (c.lambda2, c.lambda1, c.lambda0) == (1.25, 0.0, 0.0)
    assert c.discriminant == 0.0
    c2 = simple_model_coefficients(2.0, 1.5, 0.0, 0.5, 0.0, 3.0)
    assert c2.lambda2 == 0.0
    assert not c2.blowup_available
    assert c2.lambda1 == pytest.approx(2.0 * 1.5 * (0.5 / 4.0 + 2.0 * 0.5 / 3.0))
    assert c2.lambda0 == 0.0


def test_simple_coefficients_roots():
    c = LinearLimitCoefficients(1.0, 3.0, 2.0)
    assert c.discriminant == pytest.approx(1.0)
    assert (c.s1, c.s2) == (1.0, 2.0)


def test_drift_functional_uses_model_coefficients():
    # doubling the jump coefficient doubles the averaged drift functional
    import dataclasses
    spec = dataclasses.replace(simple_spec(), w_jump_coeff=(2.0,))
    m = validated(spec)
    est = estimate_pi(1.0, m, horizon=400.0, burnin=20.0, replicas=8, seed=514)
    coeffs = simple_model_coefficients(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    assert est["zbeta"].within(2.0 * coeffs.drift(1.0))


def test_mc_drift_matches_coefficient_polynomial(simple_model):
    # E[Z beta(X)] = Lambda2 w^2 at one probe weight (the full grid is in
    # the acceptance suite)
    coeffs = simple_model_coefficients(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    w = 1.0
    est = estimate_pi(w, simple_model, horizon=600.0, burnin=20.0,
                      replicas=8, seed=505)
    assert est["zbeta"].within(coeffs.drift(w))


def test_ergodic_average_stability(dominating_fast_model):
    # doubling the horizon moves each estimate by less than 3 combined SEs
    a = estimate_pi(1.0, dominating_fast_model, horizon=400.0, burnin=20.0,
                    replicas=8, seed=506)
    b = estimate_pi(1.0, dominating_fast_model, horizon=800.0, burnin=20.0,
                    replicas=8, seed=507)
    for name in ("ex", "ex2", "ez", "exz"):
        gap = abs(a[name].mean - b[name].mean)
        assert gap <= 3 * math.hypot(a[name].se, b[name].se), name


def test_se_scales_with_replica_doubling(dominating_fast_model):
    a = estimate_pi(1.0, dominating_fast_model, horizon=300.0, burnin=20.0,
                    replicas=8, seed=508)
    b = estimate_pi(1.0, dominating_fast_model, horizon=300.0, burnin=20.0,
                    replicas=16, seed=508)
    ratio = b["ex"].se / a["ex"].se
    assert 1.0 / (2 * math.sqrt(2)) <= ratio <= 2.0 / math.sqrt(2)


def test_se_scales_with_horizon_doubling(dominating_fast_model):
    # across-replica SE of a time average shrinks like 1/sqrt(horizon)
    a = estimate_pi(1.0, dominating_fast_model, horizon=320.0, burnin=20.0,
                    replicas=12, seed=512)
    b = estimate_pi(1.0, dominating_fast_model, horizon=620.0, burnin=20.0,
                    replicas=12, seed=513)
    ratio = b["ex"].se / a["ex"].se
    assert 1.0 / (2 * math.sqrt(2)) <= ratio <= 2.0 / math.sqrt(2)


def test_closed_form_psi_is_nondecreasing_in_w():
    ws = np.linspace(0.0, 5.0, 41)
    vals = [dominating_psi(w, lam=1.0, C_k=1.0, C_beta=1.0, gamma=1.0,
                           C_n=0.5, ell=2) for w in ws]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_local_lipschitz_probe(simple_model):
    # finite-difference slopes of the drift stay bounded under refinement
    coeffs = simple_model_coefficients(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    w0 = 1.0
    slopes = {}
    for k, h in enumerate((0.5, 0.25)):
        lo = estimate_pi(w0 - h / 2, simple_model, horizon=400.0, burnin=20.0,
                         replicas=8, seed=509 + 10 * k)
        hi = estimate_pi(w0 + h / 2, simple_model, horizon=400.0, burnin=20.0,
                         replicas=8, seed=510 + 10 * k)
        slopes[h] = (hi["zbeta"].mean - lo["zbeta"].mean) / h
        se = math.hypot(lo["zbeta"].se, hi["zbeta"].se) / h
        # the analytic slope is 2 Lambda2 w0
        assert abs(slopes[h] - 2 * coeffs.lambda2 * w0) <= 3 * se + 0.2 * h
    assert abs(slopes[0.25]) <= 2 * abs(slopes[0.5]) + 1.0


def test_cycle_average_consistent_with_time_average(dominating_fast_model):
    diffs = []
    for s in replica_seeds(511, 12):
        traj = simulate_fast(1.0, dominating_fast_model, 400.0, s)
        g = PolyFunctional(cx=1.0)
        ta = (cycle_average(traj, g, 20.0))
        from synapsim.simulator import occupation_functional
        tb = occupation_functional(traj, g, 20.0, 400.0) / 380.0
        diffs.append(ta - tb)
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / math.sqrt(len(diffs))
    assert abs(diffs.mean()) <= max(3 * se, 1e-3)
