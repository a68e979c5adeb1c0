"""Averaging-limit ODEs and the closed-form blow-up solutions.

The slow limit couples the integrators to the invariant law of the fast
pair through

    domega_a/dt = -alpha omega_a + Psi_a(w),
    dw/dt       = M(omega_p, omega_d, w)            (drift-mode weights)
    dw/dt       = int <c,z> beta(x) dPi_w           (jump-mode weights)

Closed-form right-hand sides exist for two families: the simple model
(quadratic weight drift Lambda2 w^2 + Lambda1 w + Lambda0) and the
dominating linear model (Psi from the stationary moment identities).
Otherwise the right-hand side is estimated by Monte Carlo with one frozen
invariant-law estimate per accepted step, evaluated at the step's
predicted midpoint weight.

For the quadratic drift the solution blows up in finite time S0 whenever
Lambda2 > 0; the three discriminant cases each have a printed closed form,
implemented verbatim (including the floor term of the oscillatory case)
and verified against the ODE by residual rather than re-derivation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import (LinearLimitCoefficients, dominating_moments,
                          estimate_pi, simple_model_coefficients)
from .model import SystemState, ValidatedModel
from .simulator import simulate
from .util import keyed_seed, parallel_map, replica_seeds

DEFAULT_CEILING = 1e6


class McPrecisionError(RuntimeError):
    """The Monte-Carlo right-hand side stayed too noisy after all retries."""


# ---------------------------------------------------------------------------
# model-family recognition for closed-form right-hand sides
# ---------------------------------------------------------------------------

def _const_val(f) -> float | None:
    return f.coeffs[0] if f.kind == "constant" else None


def simple_family_parameters(model: ValidatedModel) -> dict | None:
    """(lam, beta0, nu, B1, B2, gamma, c) when the model is the simple system."""
    s = model.spec
    if s.weight_update != "jump" or s.ell != 1 or s.k0 != (0.0,):
        return None
    if _const_val(s.g) != 0.0:
        return None
    B1, B2 = _const_val(s.k1[0]), _const_val(s.k2[0])
    if B1 is None or B2 is None:
        return None
    if s.beta.kind not in ("affine", "affine_clipped"):
        return None
    nu, beta0 = s.beta.coeffs
    return dict(lam=s.lam, beta0=beta0, nu=nu, B1=B1, B2=B2,
                gamma=s.gamma[0], c=s.w_jump_coeff[0])


def dominating_family_parameters(model: ValidatedModel) -> dict | None:
    """(lam, C_k, C_beta, gamma) when the fast block is the dominating one."""
    s = model.spec
    if s.weight_update != "drift" or s.ell != 1:
        return None
    if _const_val(s.g) != 0.0:
        return None
    ck = _const_val(s.k1[0])
    if ck is None or _const_val(s.k2[0]) != ck or s.k0 != (ck,):
        return None
    if s.beta.kind != "affine_clipped" or s.beta.coeffs[0] != s.beta.coeffs[1]:
        return None
    for a in "pd":
        for j in range(3):
            if model.n_affine_on_z(a, j) is None:
                return None
    return dict(lam=s.lam, C_k=ck, C_beta=s.beta.coeffs[0], gamma=s.gamma[0])


def _n_is_zero(model: ValidatedModel, a: str, j: int) -> bool:
    aff = model.n_affine_on_z(a, j)
    return aff is not None and aff[0] == 0.0 and not np.any(aff[1])


def closed_form_psi(model: ValidatedModel):
    """w -> (psi_p, psi_d) for a recognized family, or None."""
    if all(_n_is_zero(model, a, j) for a in "pd" for j in range(3)):
        return lambda w: (0.0, 0.0)
    if simple_family_parameters(model) is not None:
        return None
    dom = dominating_family_parameters(model)
    if dom is None:
        return None
    lam, ck, cb, gam = dom["lam"], dom["C_k"], dom["C_beta"], dom["gamma"]

    def psi(w: float) -> tuple[float, float]:
        ex, _, ez, exz = dominating_moments(w, lam, ck, cb, gam)
        out = []
        for a in "pd":
            total = 0.0
            for j, scale in ((0, 1.0), (1, lam)):
                a0, b = model.n_affine_on_z(a, j)
                total += scale * (a0 + float(b[0]) * ez)
            a0, b = model.n_affine_on_z(a, 2)
            total += cb * (a0 + float(b[0]) * ez + a0 * ex + float(b[0]) * exz)
            out.append(total)
        return tuple(out)

    return psi


def closed_form_wdot(model: ValidatedModel):
    """(omega_p, omega_d, w) -> dw/dt for a recognized family, or None."""
    simple = simple_family_parameters(model)
    if simple is not None:
        c = simple.pop("c")
        coeffs = simple_model_coefficients(**simple)
        return lambda op, od, w: c * coeffs.drift(w)
    if model.spec.weight_update == "drift":
        return lambda op, od, w: model.m_drift(op, od, w)
    return None


# ---------------------------------------------------------------------------
# limit solutions
# ---------------------------------------------------------------------------

@dataclass
class LimitSolution:
    ts: np.ndarray
    omega_p: np.ndarray
    omega_d: np.ndarray
    w: np.ndarray
    rhs_source: str                       # "closed-form" | "monte-carlo"
    step_se: list | None = None           # per accepted step, MC mode
    blowup_time: float | None = None
    ceiling: float = DEFAULT_CEILING

    def w_at(self, t: float) -> float:
        return float(np.interp(t, self.ts, self.w))


def _rk4_vec_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def solve_limit_ode(model: ValidatedModel, init: tuple[float, float, float],
                    horizon: float, rhs: str = "closed-form", step: float = 1e-3,
                    *, ceiling: float = DEFAULT_CEILING, seed=0,
                    replicas: int = 32, se_fraction: float = 0.05,
                    max_retries: int = 5, truncation: float = math.inf,
                    pi_horizon: float | None = None, pi_burnin: float | None = None,
                    workers: int = 1) -> LimitSolution:
    """RK4 integration of the averaging limit from (omega_p0, omega_d0, w0).

    In "monte-carlo" mode each accepted step freezes one invariant-law
    estimate, taken at the step's predicted midpoint weight (capped at the
    truncation level when one is given); a step whose estimate is noisier
    than ``se_fraction`` of the right-hand side magnitude is retried with
    twice the replicas.
    """
    alpha = model.spec.alpha
    y = np.array(init, dtype=float)
    ts = [0.0]
    path = [y.copy()]
    ses: list[dict] | None = None
    blowup = None

    if rhs == "closed-form":
        psi = closed_form_psi(model)
        wdot = closed_form_wdot(model)
        if psi is None or wdot is None:
            raise ValueError("no closed-form right-hand side for this model")

        def f(t, y):
            pp, pd_ = psi(min(y[2], truncation))
            return np.array([-alpha * y[0] + pp, -alpha * y[1] + pd_,
                             wdot(y[0], y[1], y[2])])

        t = 0.0
        while t < horizon - 1e-12 * max(1.0, horizon):
            h = min(step, horizon - t)
            y = _rk4_vec_step(f, t, y, h)
            t += h
            ts.append(t)
            path.append(y.copy())
            if np.max(np.abs(y)) > ceiling:
                blowup = t
                break
    elif rhs == "monte-carlo":
        if model.spec.weight_update == "drift":
            wdot_from = lambda est, op, od, w: model.m_drift(op, od, w)
        else:
            wdot_from = lambda est, op, od, w: est["zbeta"].mean
        ses = []
        t = 0.0
        prev_wdot = None
        n_step = 0
        while t < horizon - 1e-12 * max(1.0, horizon):
            h = min(step, horizon - t)
            if prev_wdot is None:
                boot = _checked_estimate(model, min(y[2], truncation), replicas,
                                         keyed_seed_int(seed, 0, 0), se_fraction,
                                         max_retries, pi_horizon, pi_burnin, workers)
                prev_wdot = wdot_from(boot, y[0], y[1], y[2])
            w_mid = min(y[2] + 0.5 * h * prev_wdot, truncation)
            est, rep_used = _checked_estimate(model, w_mid, replicas,
                                              keyed_seed_int(seed, 1, n_step),
                                              se_fraction, max_retries,
                                              pi_horizon, pi_burnin, workers,
                                              return_replicas=True)
            pp, pd_ = est["psi_p"].mean, est["psi_d"].mean

            def f(_, yv):
                return np.array([-alpha * yv[0] + pp, -alpha * yv[1] + pd_,
                                 wdot_from(est, yv[0], yv[1], yv[2])])

            y = _rk4_vec_step(f, t, y, h)
            t += h
            n_step += 1
            ts.append(t)
            path.append(y.copy())
            ses.append({"psi_p": est["psi_p"].se, "psi_d": est["psi_d"].se,
                        "zbeta": est["zbeta"].se, "replicas": rep_used,
                        "w_mid": w_mid})
            prev_wdot = wdot_from(est, y[0], y[1], y[2])
            if np.max(np.abs(y)) > ceiling:
                blowup = t
                break
    else:
        raise ValueError("rhs must be 'closed-form' or 'monte-carlo'")

    arr = np.array(path)
    return LimitSolution(np.array(ts), arr[:, 0], arr[:, 1], arr[:, 2],
                         rhs_source=rhs, step_se=ses, blowup_time=blowup,
                         ceiling=ceiling)


def keyed_seed_int(seed, *key):
    if isinstance(seed, np.random.SeedSequence):
        base = int(seed.generate_state(1)[0])
    else:
        base = int(seed)
    return keyed_seed(base, *key)


def _checked_estimate(model, w, replicas, seed, se_fraction, max_retries,
                      pi_horizon, pi_burnin, workers, return_replicas=False):
    """estimate_pi with the step-rejection rule on the used functionals."""
    needed = (["psi_p", "psi_d", "zbeta"] if model.spec.weight_update == "jump"
              else ["psi_p", "psi_d"])
    rep = replicas
    for attempt in range(max_retries + 1):
        est = estimate_pi(w, model, horizon=pi_horizon, burnin=pi_burnin,
                          replicas=rep, seed=seed.spawn(1)[0], workers=workers)
        noisy = any(est[name].se > se_fraction * abs(est[name].mean) + 1e-12
                    for name in needed)
        if not noisy:
            return (est, rep) if return_replicas else est
        rep *= 2
    raise McPrecisionError(
        f"rhs estimate at w={w:g} still noisier than {se_fraction:.0%} "
        f"after {max_retries} doublings")


# ---------------------------------------------------------------------------
# blow-up closed forms
# ---------------------------------------------------------------------------

@dataclass
class BlowupSolution:
    """Explicit solution of w' = L2 w^2 + L1 w + L0 from w(0) = w0, L2 > 0."""

    coeffs: LinearLimitCoefficients
    w0: float
    case: str
    S0: float
    z0: float | None = None

    def value(self, t):
        """w(t) for t < S0; accepts real or complex t (for derivative probes)."""
        L2, L1 = self.coeffs.lambda2, self.coeffs.lambda1
        if self.case == "delta_pos":
            s1, s2 = self.coeffs.s1, self.coeffs.s2
            rd = math.sqrt(self.coeffs.discriminant)
            e = cmath.exp(rd * t) if isinstance(t, complex) else math.exp(rd * t)
            num = s2 * (self.w0 + s1) * e - s1 * (self.w0 + s2)
            den = (self.w0 + s2) - (self.w0 + s1) * e
            return num / den
        if self.case == "delta_zero":
            a = 2.0 * self.w0 * L2 + L1
            return a / (L2 * (2.0 - a * t)) - L1 / (2.0 * L2)
        rd = math.sqrt(-self.coeffs.discriminant)
        # any pi-multiple shift floor(z0/pi + 1/2)*pi of the argument is
        # absorbed by the period of tan; an additive shift outside would
        # break w(0) = w0 as soon as z0 >= pi/2
        arg = 0.5 * rd * t + math.atan(self.z0)
        tan = cmath.tan(arg) if isinstance(t, complex) else math.tan(arg)
        return rd / (2.0 * L2) * tan - L1 / (2.0 * L2)

    def values(self, ts) -> np.ndarray:
        return np.array([self.value(float(t)) for t in np.atleast_1d(ts)])


def blowup_solution(coeffs: LinearLimitCoefficients, w0: float) -> BlowupSolution:
    if coeffs.lambda2 <= 0:
        raise ValueError("closed-form blow-up needs Lambda2 > 0")
    if w0 < 0:
        raise ValueError("w0 must be non-negative")
    d = coeffs.discriminant
    if d > 0:
        if w0 + coeffs.s1 <= 0:
            raise ValueError("degenerate start: w0 = -s1 is a fixed point")
        S0 = math.log((w0 + coeffs.s2) / (w0 + coeffs.s1)) / math.sqrt(d)
        return BlowupSolution(coeffs, w0, "delta_pos", S0)
    if d == 0:
        a = 2.0 * w0 * coeffs.lambda2 + coeffs.lambda1
        if a <= 0:
            raise ValueError("degenerate start: w stays at the fixed point")
        return BlowupSolution(coeffs, w0, "delta_zero", 2.0 / a)
    rd = math.sqrt(-d)
    z0 = (2.0 * w0 * coeffs.lambda2 + coeffs.lambda1) / rd
    S0 = 2.0 / rd * (math.pi / 2.0 - math.atan(z0))
    return BlowupSolution(coeffs, w0, "delta_neg", S0, z0)


def blowup_from_model(model: ValidatedModel, w0: float) -> BlowupSolution:
    params = simple_family_parameters(model)
    if params is None:
        raise ValueError("blow-up closed form requires the simple model family")
    c = params.pop("c")
    coeffs = simple_model_coefficients(**params)
    if c != 1.0:
        # dw/dt = c (L2 w^2 + L1 w + L0): the scaled coefficients solve it
        coeffs = LinearLimitCoefficients(c * coeffs.lambda2, c * coeffs.lambda1,
                                         c * coeffs.lambda0)
    return blowup_solution(coeffs, w0)


# ---------------------------------------------------------------------------
# epsilon-convergence sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepEntry:
    epsilon: float
    sup_error: float
    mean_path: np.ndarray
    sd_path: np.ndarray
    per_replica_sup: np.ndarray


@dataclass
class SweepReport:
    ts: np.ndarray
    limit_w: np.ndarray
    entries: list[SweepEntry]
    replicas: int

    @property
    def monotone(self) -> bool:
        """Errors non-increasing as epsilon decreases."""
        by_eps = sorted(self.entries, key=lambda e: -e.epsilon)
        errs = [e.sup_error for e in by_eps]
        return all(b <= a for a, b in zip(errs, errs[1:]))


def _sweep_replica(args):
    model, u0, horizon, eps, seed, ts = args
    traj = simulate(model, u0, horizon, eps, seed)
    return np.array([s.w for s in traj.sample(ts)])


def convergence_sweep(model: ValidatedModel, epsilons, horizon: float,
                      replicas: int, seed=0, u0: SystemState | None = None,
                      grid_n: int = 101, limit=None, workers: int = 1) -> SweepReport:
    """Sup-norm distance of replica-mean weight paths to the limit solution."""
    if u0 is None:
        u0 = SystemState(0.0, np.zeros(model.spec.ell), 0.0, 0.0, 1.0)
    ts = np.linspace(0.0, horizon, grid_n)
    if limit is None:
        if simple_family_parameters(model) is not None:
            limit = blowup_from_model(model, u0.w)
        else:
            sol = solve_limit_ode(model, (u0.omega_p, u0.omega_d, u0.w), horizon,
                                  rhs="closed-form", step=horizon / 4096)
            limit = sol
    if isinstance(limit, BlowupSolution):
        if horizon >= limit.S0:
            raise ValueError("sweep horizon must stay inside the blow-up window")
        limit_w = np.real(limit.values(ts))
    elif isinstance(limit, LimitSolution):
        limit_w = np.interp(ts, limit.ts, limit.w)
    elif callable(limit):
        limit_w = np.array([limit(t) for t in ts])
    else:
        limit_w = np.asarray(limit, dtype=float)

    entries = []
    for k, eps in enumerate(epsilons):
        seeds = replica_seeds(keyed_seed_int(seed, 2, k), replicas)
        paths = parallel_map(_sweep_replica,
                             [(model, u0, horizon, eps, s, ts) for s in seeds],
                             workers=workers)
        paths = np.array(paths)
        mean = paths.mean(axis=0)
        sd = paths.std(axis=0, ddof=1) if replicas > 1 else np.zeros_like(mean)
        entries.append(SweepEntry(
            epsilon=eps,
            sup_error=float(np.max(np.abs(mean - limit_w))),
            mean_path=mean, sd_path=sd,
            per_replica_sup=np.max(np.abs(paths - limit_w), axis=1),
        ))
    return SweepReport(ts, limit_w, entries, replicas)
