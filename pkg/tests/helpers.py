"""Shared oracle helpers for the blow-up checks."""

import numpy as np

from synapsim.equilibrium import LinearLimitCoefficients
from synapsim.flow import rk4_adaptive


def complex_step_residual(sol, n=61):
    """max_t |w'(t) - drift(w(t))| on [0, 0.9 S0], derivative by complex step.

    The complex step has no subtractive cancellation, so the 1e-8 residual
    tolerance is meaningful even where the solution grows steeply.
    """
    ts = np.linspace(0.0, 0.9 * sol.S0, n)
    h = 1e-8
    worst = 0.0
    for t in ts:
        wp = sol.value(complex(float(t), h)).imag / h
        w = sol.value(float(t))
        worst = max(worst, abs(wp - sol.coeffs.drift(w)))
    return worst


def rk4_deviation(sol, n=5, tol=1e-12):
    """max deviation between adaptive RK4 on the drift and the closed form."""
    drift = sol.coeffs.drift
    w, t = sol.w0, 0.0
    worst = 0.0
    for tt in np.linspace(0.0, 0.9 * sol.S0, n)[1:]:
        w, _ = rk4_adaptive(lambda s, y: drift(y), t, w, float(tt) - t, tol=tol)
        t = float(tt)
        worst = max(worst, abs(w - sol.value(t)))
    return worst


def random_blowup_cases(case, n, seed):
    """Coefficient draws per discriminant case; the zero case uses dyadic
    values so the discriminant is exactly zero in floating point."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        if case == "pos":
            l2 = rng.uniform(0.5, 2.0)
            l1 = rng.uniform(0.5, 2.0)
            l0 = rng.uniform(0.05, 0.95) * l1 * l1 / (4 * l2)
            w0 = rng.uniform(0.0, 1.0)
            c = LinearLimitCoefficients(l2, l1, l0)
            if c.discriminant <= 0:
                continue
        elif case == "zero":
            l2 = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
            l1 = rng.integers(0, 9) / 4.0
            l0 = l1 * l1 / (4 * l2)
            w0 = rng.integers(1, 9) / 8.0
            c = LinearLimitCoefficients(l2, l1, l0)
            if c.discriminant != 0.0:
                continue
        else:
            l2 = rng.uniform(0.5, 2.0)
            l1 = rng.uniform(0.0, 2.0)
            l0 = (l1 * l1 + rng.uniform(0.5, 30.0)) / (4 * l2)
            w0 = rng.uniform(0.0, 3.0)
            c = LinearLimitCoefficients(l2, l1, l0)
            if c.discriminant >= 0:
                continue
        out.append((c, w0))
    return out
