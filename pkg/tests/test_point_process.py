import math

import numpy as np
import pytest
from scipy import stats

from synapsim.point_process import (EnvelopeViolation, EventStream,
                                    next_jump_thinned, poisson_integral_fourth_moment,
                                    sample_homogeneous, shot_noise_laplace,
                                    shot_noise_mean, simulate_interacting_shot_noise,
                                    simulate_shot_noise)
from synapsim.util import replica_seeds, rng_from

# quadrature of the stationary Laplace functional at xi = 1, lambda = 1:
# exp(int_0^1 (e^u - 1)/u du) = exp(1.3179021514544039)
EXP_MOMENT_STATIONARY = 3.7355764777516315


def test_zero_rate_gives_empty_stream():
    ev = sample_homogeneous(0.0, 5.0, 1)
    assert len(ev) == 0


def test_rejects_bad_streams():
    with pytest.raises(ValueError):
        EventStream(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        EventStream(np.array([1.0, 2.0]), np.array([0.5]))
    with pytest.raises(ValueError):
        sample_homogeneous(-1.0, 1.0, 1)


def test_mean_count_matches_poisson_law():
    # rate 1000 over unit horizon, 1e4 replicas: SE of the mean = sqrt(1000/1e4)
    rng = rng_from(101)
    counts = [len(sample_homogeneous(1000.0, 1.0, rng)) for _ in range(10_000)]
    se = math.sqrt(1000.0 / 10_000)
    assert abs(np.mean(counts) - 1000.0) <= 3 * se


def test_no_event_probability():
    rng = rng_from(102)
    n = 10_000
    empty = sum(len(sample_homogeneous(2.0, 1.0, rng)) == 0 for _ in range(n))
    p = empty / n
    target = math.exp(-2.0)
    se = math.sqrt(target * (1 - target) / n)
    assert abs(p - target) <= 3 * se


def test_marks_are_open_unit_uniforms():
    ev = sample_homogeneous(100.0, 2.0, 7, with_marks=True)
    assert ev.marks.shape == ev.times.shape
    assert 0.0 < ev.marks.min() and ev.marks.max() < 1.0


def test_thinning_constant_intensity_is_exponential():
    # intensity == envelope: every candidate accepted, gap ~ Exp(c)
    rng = rng_from(103)
    c = 2.0
    draws = np.array([next_jump_thinned(c, lambda t: c, 0.0, rng)
                      for _ in range(10_000)])
    assert stats.kstest(draws, "expon", args=(0.0, 1.0 / c)).pvalue > 0.01


def test_thinning_zero_intensity_never_fires():
    rng = rng_from(104)
    for _ in range(50):
        assert next_jump_thinned(1.0, lambda t: 0.0, 0.0, rng, horizon=50.0) is None


def test_thinning_envelope_violation_is_hard_error():
    with pytest.raises(EnvelopeViolation):
        next_jump_thinned(1.0, lambda t: 2.0, 0.0, rng_from(1), horizon=10.0)


def test_thinning_survival_of_decaying_intensity():
    # intensity 2 e^{-t}: P(no jump by T) = exp(-2(1 - e^{-T}))
    rng = rng_from(105)
    n = 10_000
    T = 8.0
    none = sum(next_jump_thinned(2.0, lambda t: 2.0 * math.exp(-t), 0.0, rng,
                                 horizon=T) is None for _ in range(n))
    target = math.exp(-2.0 * (1.0 - math.exp(-T)))
    se = math.sqrt(target * (1 - target) / n)
    assert abs(none / n - target) <= 3 * se
    assert target == pytest.approx(math.exp(-2.0), abs=1e-3)


def test_thinning_survival_curve_at_checkpoints():
    rng = rng_from(106)
    n = 4000
    checkpoints = [0.25, 0.5, 1.0, 2.0, 4.0]
    draws = [next_jump_thinned(2.0, lambda t: 2.0 * math.exp(-t), 0.0, rng,
                               horizon=50.0)
             for _ in range(n)]
    draws = np.array([math.inf if d is None else d for d in draws])
    for t in checkpoints:
        emp = float(np.mean(draws > t))
        target = math.exp(-2.0 * (1.0 - math.exp(-t)))
        se = math.sqrt(target * (1 - target) / n)
        assert abs(emp - target) <= 3 * se, f"checkpoint {t}"


def test_shot_noise_pure_decay_without_events():
    path = simulate_shot_noise(0.5, 0.0, 2.0, 4.0, 1)
    for t in (0.0, 0.5, 1.5, 4.0):
        assert path.value_at(t) == pytest.approx(2.0 * math.exp(-t / 0.5), rel=1e-15)


def test_shot_noise_stationary_mean():
    # at t = 12 the transient x0 e^{-t} is ~6e-6; mean ~ lambda = 1
    rng = rng_from(107)
    n = 10_000
    vals = np.array([simulate_shot_noise(1.0, 1.0, 0.0, 12.0, rng).value_at(12.0)
                     for _ in range(n)])
    se = vals.std(ddof=1) / math.sqrt(n)
    assert abs(vals.mean() - shot_noise_mean(12.0, 1.0)) <= 3 * se


def test_shot_noise_exponential_moment_vs_quadrature():
    rng = rng_from(108)
    n = 10_000
    vals = np.exp([simulate_shot_noise(1.0, 1.0, 0.0, 12.0, rng).value_at(12.0)
                   for _ in range(n)])
    se = vals.std(ddof=1) / math.sqrt(n)
    target = shot_noise_laplace(1.0, math.inf, 1.0)
    assert abs(vals.mean() - target) <= 3 * se


def test_laplace_oracle_values():
    assert shot_noise_laplace(0.0, 5.0, 1.0) == 1.0
    assert shot_noise_laplace(1.0, math.inf, 1.0) == pytest.approx(
        EXP_MOMENT_STATIONARY, abs=1e-9)
    for xi in (-0.5, -2.0):
        v = shot_noise_laplace(xi, math.inf, 1.0)
        assert 0.0 < v <= 1.0
    # finite and infinite horizons agree once the transient is dead
    assert shot_noise_laplace(1.0, 60.0, 1.0) == pytest.approx(
        shot_noise_laplace(1.0, math.inf, 1.0), abs=1e-12)


def test_mc_moments_match_laplace_derivatives():
    # central differences of the Laplace transform at xi = 0, step 1e-4
    rng = rng_from(109)
    n = 10_000
    t, lam, h = 12.0, 1.0, 1e-4
    vals = np.array([simulate_shot_noise(1.0, lam, 0.0, t, rng).value_at(t)
                     for _ in range(n)])
    lp = shot_noise_laplace(h, t, lam)
    lm = shot_noise_laplace(-h, t, lam)
    mean_oracle = (lp - lm) / (2 * h)
    m2_oracle = (lp - 2.0 + lm) / (h * h)
    se1 = vals.std(ddof=1) / math.sqrt(n)
    sq = vals ** 2
    se2 = sq.std(ddof=1) / math.sqrt(n)
    assert abs(vals.mean() - mean_oracle) <= 3 * se1
    assert abs(sq.mean() - m2_oracle) <= 3 * se2


def test_path_reconstruction_from_event_log():
    # recursion along left edges vs direct filtered sum, to 1e-12
    path = simulate_shot_noise(0.3, 5.0, 1.5, 3.0, 11)
    edges = path.left_edge_values()
    assert len(edges) == len(path.times) + 1
    for k, tk in enumerate(path.times):
        direct = path.value_at(tk)
        assert direct == pytest.approx(edges[k + 1], abs=1e-12)
    ts = np.linspace(0, 3.0, 17)
    for t in ts:
        brute = 1.5 * math.exp(-t / 0.3) + sum(
            math.exp(-(t - s) / 0.3) for s in path.times if s <= t)
        assert path.value_at(t) == pytest.approx(brute, abs=1e-12)


def test_same_seed_is_bit_identical():
    a = simulate_shot_noise(0.5, 2.0, 0.0, 5.0, 42)
    b = simulate_shot_noise(0.5, 2.0, 0.0, 5.0, 42)
    assert np.array_equal(a.times, b.times)
    c = simulate_interacting_shot_noise(0.1, 1.0, 1.0, 1.0, 43)
    d = simulate_interacting_shot_noise(0.1, 1.0, 1.0, 1.0, 43)
    assert np.array_equal(c.r_times, d.r_times)


def test_interacting_starts_at_zero():
    path = simulate_interacting_shot_noise(0.5, 1.0, 1.0, 1.0, 3)
    assert path.r_value_at(0.0) == 0.0


def test_interacting_mean_matches_nested_filter_oracle():
    # E[R(t) | S] is the filtered integral of S: the paired difference
    # R_i(t) - E[R(t) | S_i] is mean-zero
    n = 3000
    t = 1.0
    diffs = []
    for s in replica_seeds(110, n):
        path = simulate_interacting_shot_noise(0.05, 1.0, 1.0, t, s)
        diffs.append(path.r_value_at(t) - path.conditional_r_mean(t))
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / math.sqrt(n)
    assert abs(diffs.mean()) <= 3 * se


def test_fourth_moment_no_increasing_trend():
    # bounded-sup property probed as a trend over decreasing epsilon
    n = 2000
    m4, ses = {}, {}
    for eps in (1.0, 0.1, 0.01):
        vals = []
        for s in replica_seeds(111, n):
            path = simulate_interacting_shot_noise(eps, 1.0, 1.0, 1.0, s)
            vals.append(path.r_value_at(1.0) ** 4)
        vals = np.array(vals)
        m4[eps] = vals.mean()
        ses[eps] = vals.std(ddof=1) / math.sqrt(n)
    largest_other = max(m4[1.0], m4[0.1])
    slack = 3 * math.sqrt(ses[0.01] ** 2 + max(ses[1.0], ses[0.1]) ** 2)
    assert m4[0.01] <= largest_other + slack


def test_poisson_fourth_moment_formula():
    # homogeneous special case: all cumulants equal lam*T
    lam_t = 1.7
    expected = lam_t + 7 * lam_t ** 2 + 6 * lam_t ** 3 + lam_t ** 4
    got = poisson_integral_fourth_moment(lam_t, lam_t, lam_t, lam_t)
    assert got == pytest.approx(expected, rel=1e-14)
