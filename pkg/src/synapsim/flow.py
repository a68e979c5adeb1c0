"""Deterministic evolution of the state between jumps.

With the fast components on the 1/eps clock, the inter-jump flow is

    X(t0+s)   = X e^{-s/eps}
    Z_i(t0+s) = k0_i/gamma_i + (Z_i - k0_i/gamma_i) e^{-gamma_i s/eps}
    Om_a(t0+s)= Om_a e^{-alpha s} + int_0^s e^{-alpha(s-u)} n_a0(Z(t0+u)) du
    W'        = M(Om_p, Om_d, W)        ("drift" mode; constant in "jump" mode)

X and Z are exact.  The Omega convolution is exact (sum of exponentials)
whenever n_a0 is affine in z, which covers every linear-growth example;
otherwise it falls back to adaptive quadrature.  W is advanced by an
embedded Runge-Kutta 4 step, sub-stepped until the local error estimate
is below tolerance, with the Omega inputs evaluated along their own flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .model import SystemState, ValidatedModel

RK_TOL = 1e-12
QUAD_TOL = 1e-11


def _decay_mix(alpha: float, r: float, s: float) -> float:
    """int_0^s e^{-alpha(s-u)} e^{-r u} du."""
    if s == 0.0:
        return 0.0
    if abs(alpha - r) < 1e-13 * max(alpha, r, 1.0):
        return s * math.exp(-alpha * s)
    return (math.exp(-r * s) - math.exp(-alpha * s)) / (alpha - r)


class OmegaFlow:
    """Evaluator of one integrator component along the inter-jump flow."""

    def __init__(self, model: ValidatedModel, a: str, omega0: float,
                 z0: np.ndarray, epsilon: float):
        self.model = model
        self.a = a
        self.omega0 = omega0
        self.z0 = np.asarray(z0, dtype=float)
        self.eps = epsilon
        self.alpha = model.spec.alpha
        aff = model.n_affine_on_z(a, 0)
        if aff is not None:
            a0, b = aff
            self.method = "closed-form"
            self._A = a0 + float(b @ model.kbar)
            self._B = b * (self.z0 - model.kbar)
            self._r = model.gamma / epsilon
        else:
            self.method = "quadrature"
        self.error = 0.0

    def _inflow_integral(self, s: float) -> float:
        al = self.alpha
        if self.method == "closed-form":
            out = self._A * (-math.expm1(-al * s)) / al if al > 0 else self._A * s
            for Bi, ri in zip(self._B, self._r):
                if Bi != 0.0:
                    out += Bi * _decay_mix(al, ri, s)
            return out
        m, z0, eps = self.model, self.z0, self.eps

        def integrand(u):
            zu = m.kbar + (z0 - m.kbar) * np.exp(-m.gamma * u / eps)
            return math.exp(-al * (s - u)) * m.n_eval(self.a, 0, zu)

        val, err = quad(integrand, 0.0, s, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        self.error = max(self.error, err)
        return val

    def at(self, s: float) -> float:
        if s == 0.0:
            return self.omega0
        return self.omega0 * math.exp(-self.alpha * s) + self._inflow_integral(s)


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_adaptive(f, t0: float, y0: float, span: float, tol: float = RK_TOL):
    """Integrate y' = f(t, y) over [t0, t0+span] with step-doubling control.

    Returns (y, accumulated local error estimate).
    """
    if span == 0.0:
        return y0, 0.0
    t, y = t0, y0
    end = t0 + span
    h = span
    err_total = 0.0
    h_min = span * 1e-12
    while t < end - 1e-15 * max(1.0, abs(end)):
        h = min(h, end - t)
        y_big = _rk4_step(f, t, y, h)
        y_half = _rk4_step(f, t, y, 0.5 * h)
        y_two = _rk4_step(f, t + 0.5 * h, y_half, 0.5 * h)
        err = abs(y_two - y_big) / 15.0
        if err <= tol * max(1.0, abs(y_two)) or h <= h_min:
            t += h
            y = y_two
            err_total += err
            if err <= tol * max(1.0, abs(y_two)) / 64.0:
                h *= 2.0
        else:
            h *= 0.5
    return y, err_total


@dataclass
class FlowResult:
    state: SystemState
    methods: dict = field(default_factory=dict)   # component -> method tag
    error: dict = field(default_factory=dict)     # non-closed-form estimates
    w_clamped: bool = False


def flow_state(state: SystemState, dt: float, model: ValidatedModel,
               epsilon: float = 1.0, rk_tol: float = RK_TOL) -> FlowResult:
    """Advance the state by dt with no jump in between."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    s = state
    if dt == 0.0:
        return FlowResult(s.copy(), {"x": "closed-form", "z": "closed-form",
                                     "omega": "closed-form", "w": "closed-form"},
                          {"x": 0.0, "z": 0.0, "omega": 0.0, "w": 0.0})
    m = model
    x1 = s.x * math.exp(-dt / epsilon)
    z1 = m.kbar + (s.z - m.kbar) * np.exp(-m.gamma * dt / epsilon)

    om_p = OmegaFlow(m, "p", s.omega_p, s.z, epsilon)
    om_d = OmegaFlow(m, "d", s.omega_d, s.z, epsilon)
    op1 = om_p.at(dt)
    od1 = om_d.at(dt)

    methods = {"x": "closed-form", "z": "closed-form", "omega": om_p.method}
    error = {"x": 0.0, "z": 0.0, "omega": max(om_p.error, om_d.error)}

    clamped = False
    if m.spec.weight_update == "jump":
        w1 = s.w
        methods["w"] = "closed-form"
        error["w"] = 0.0
    else:
        mp, md, delta = m.spec.m_p, m.spec.m_d, m.spec.delta
        if mp.kind == "constant" and md.kind == "constant" and delta == 0.0:
            w1 = s.w + (mp.coeffs[0] - md.coeffs[0]) * dt
            methods["w"] = "closed-form"
            error["w"] = 0.0
        else:
            def wdot(u, w):
                return mp.scalar(om_p.at(u)) - md.scalar(om_d.at(u)) - delta * w

            w1, werr = rk4_adaptive(wdot, 0.0, s.w, dt, tol=rk_tol)
            methods["w"] = "rk-step"
            error["w"] = werr
        lo, hi = m.spec.kw
        if w1 < lo or w1 > hi:
            w1 = min(max(w1, lo), hi)
            clamped = True

    out = SystemState(x1, z1, op1, od1, w1, s.t + dt)
    return FlowResult(out, methods, error, clamped)
