"""Exact event-driven simulation of the plasticity jump system.

One loop covers the full scaled system, the frozen-weight fast system,
the dominating process (which is just another model instance with linear
coefficients), and its truncated variant (pre-spike potential jumps capped
at K).  Between events the state follows the closed-form flow; events are

    pre-spike  (Poisson rate lambda/eps):
        X += W,  Z += k1(Z-),  Om_a += eps n_a1(Z-)
    post-spike (state-dependent rate beta(X(t-))/eps, by thinning):
        X -= g(X-),  Z += k2(Z-),  Om_a += eps n_a2(Z-)
        W += eps <c, Z->          (jump-mode weights only)

Thinning envelope: between events |X| decays, so C_beta(1+|X|)/eps taken
at the last event dominates the post intensity until the next event; it
is refreshed at every state jump.

The coupled run drives an original/dominating pair from one realization:
shared pre-spike epochs, and shared post candidates at the dominating
envelope with shared marks, each process applying its own acceptance
threshold.  Domination then holds path-wise and is asserted, not tested
statistically.
"""

from __future__ import annotations

import inspect
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from .flow import RK_TOL, flow_state
from .functions import affine, affine_clipped, constant
from .model import Bounds, ModelSpec, NSpecs, SystemState, ValidatedModel, validated
from .point_process import EnvelopeViolation
from .util import rng_from

PRE, POST = 0, 1
KIND_NAMES = {PRE: "pre", POST: "post"}
DEFAULT_EVENT_BUDGET = 10_000_000


class CouplingOrderError(AssertionError):
    """Path-wise domination failed; indicates a simulator bug."""


# ---------------------------------------------------------------------------
# trajectory record
# ---------------------------------------------------------------------------

def _apply_jump(state: SystemState, kind: int, model: ValidatedModel,
                epsilon: float, x_jump_cap: float = math.inf) -> None:
    """Jump map at an event; amplitudes use the flowed pre-jump state."""
    z_pre = state.z
    if kind == PRE:
        amp = state.w if math.isinf(x_jump_cap) else min(x_jump_cap, state.w)
        state.x += amp
        state.z = z_pre + model.k1_vec(z_pre)
        state.omega_p += epsilon * model.n_eval("p", 1, z_pre)
        state.omega_d += epsilon * model.n_eval("d", 1, z_pre)
    else:
        state.x -= model.g(state.x)
        state.z = z_pre + model.k2_vec(z_pre)
        state.omega_p += epsilon * model.n_eval("p", 2, z_pre)
        state.omega_d += epsilon * model.n_eval("d", 2, z_pre)
        if model.spec.weight_update == "jump":
            state.w += epsilon * model.w_jump(z_pre)


@dataclass
class Trajectory:
    """Event log plus strided state checkpoints; dense output on demand."""

    model: ValidatedModel
    epsilon: float
    u0: SystemState
    horizon: float
    times: np.ndarray
    kinds: np.ndarray
    cp_index: np.ndarray          # event indices carrying a stored state
    cp_states: np.ndarray         # rows: x, z_1..z_ell, omega_p, omega_d, w
    final_state: SystemState
    truncated: bool = False
    clamp_events: int = 0
    x_jump_cap: float = math.inf
    seed_info: str = ""

    @property
    def n_events(self) -> int:
        return len(self.times)

    def event_times(self, kind: int) -> np.ndarray:
        return self.times[self.kinds == kind]

    def _unpack(self, row: np.ndarray, t: float) -> SystemState:
        ell = self.model.spec.ell
        return SystemState(row[0], row[1 : 1 + ell].copy(), row[1 + ell],
                           row[2 + ell], row[3 + ell], t)

    def state_after_event(self, i: int) -> SystemState:
        """State just after event i (i = -1 gives the initial state)."""
        if i < 0:
            s = self.u0.copy()
            s.t = 0.0
            return s
        k = bisect_right(self.cp_index, i) - 1
        if k >= 0 and self.cp_index[k] == i:
            return self._unpack(self.cp_states[k], self.times[i])
        if k >= 0:
            j = int(self.cp_index[k])
            state = self._unpack(self.cp_states[k], self.times[j])
        else:
            j = -1
            state = self.u0.copy()
            state.t = 0.0
        t = 0.0 if j < 0 else self.times[j]
        for m in range(j + 1, i + 1):
            state = flow_state(state, self.times[m] - t, self.model, self.epsilon).state
            _apply_jump(state, int(self.kinds[m]), self.model, self.epsilon, self.x_jump_cap)
            t = self.times[m]
        return state

    def state_at(self, t: float) -> SystemState:
        if t < 0 or t > self.horizon + 1e-12:
            raise ValueError("time outside the simulated window")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        base = self.state_after_event(i)
        return flow_state(base, t - base.t, self.model, self.epsilon).state

    def sample(self, ts) -> list[SystemState]:
        """States at sorted sample times, replaying each segment once."""
        ts = np.asarray(ts, dtype=float)
        if np.any(np.diff(ts) < 0):
            raise ValueError("sample times must be sorted")
        out = []
        i = -1
        state = self.u0.copy()
        state.t = 0.0
        for t in ts:
            target = int(np.searchsorted(self.times, t, side="right")) - 1
            while i < target:
                i += 1
                state = flow_state(state, self.times[i] - state.t, self.model,
                                   self.epsilon).state
                _apply_jump(state, int(self.kinds[i]), self.model, self.epsilon,
                            self.x_jump_cap)
            out.append(flow_state(state, t - state.t, self.model, self.epsilon).state)
        return out

    def pieces(self, t0: float = 0.0, t1: float | None = None):
        """Yield (start_state, duration) covering [t0, t1] between events."""
        if t1 is None:
            t1 = self.horizon
        state = self.state_at(t0)
        lo = int(np.searchsorted(self.times, t0, side="right"))
        hi = int(np.searchsorted(self.times, t1, side="left"))
        t = t0
        for i in range(lo, hi):
            ti = self.times[i]
            if ti > t:
                yield state, ti - t
            state = flow_state(state, ti - state.t, self.model, self.epsilon).state
            _apply_jump(state, int(self.kinds[i]), self.model, self.epsilon,
                        self.x_jump_cap)
            t = ti
        if t1 > t:
            yield state, t1 - t


# ---------------------------------------------------------------------------
# event loops
# ---------------------------------------------------------------------------

def simulate(model: ValidatedModel, u0: SystemState, horizon: float,
             epsilon: float = 1.0, rng=None, *, x_jump_cap: float = math.inf,
             max_events: int = DEFAULT_EVENT_BUDGET, stride: int = 1,
             rk_tol: float = RK_TOL, seed_info: str = "") -> Trajectory:
    """Sample one exact path of the scaled system on [0, horizon]."""
    if not (0 < epsilon <= 1.0):
        raise ValueError("epsilon must lie in (0, 1]")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = rng_from(rng)
    spec = model.spec
    lo, hi = spec.kw
    if not (lo <= u0.w <= hi):
        raise ValueError("initial weight outside K_W")
    pre_rate = spec.lam / epsilon

    state = u0.copy()
    state.t = 0.0
    times: list[float] = []
    kinds: list[int] = []
    cp_i: list[int] = []
    cp_rows: list[np.ndarray] = []
    truncated = False
    clamps = 0
    t = 0.0
    n = 0
    while True:
        if n >= max_events:
            truncated = True
            break
        t_pre = t + rng.exponential(1.0 / pre_rate) if pre_rate > 0 else math.inf
        env = model.post_envelope(state.x) / epsilon
        t_post = math.inf
        if env > 0.0:
            limit = min(t_pre, horizon)
            s = t
            while True:
                s += rng.exponential(1.0 / env)
                if s >= limit:
                    break
                x_s = state.x * math.exp(-(s - t) / epsilon)
                lam_post = model.beta(x_s) / epsilon
                if lam_post > env * (1.0 + 1e-12):
                    raise EnvelopeViolation(
                        f"post intensity {lam_post:g} exceeds envelope {env:g}")
                if rng.uniform() * env <= lam_post:
                    t_post = s
                    break
        t_next = min(t_pre, t_post)
        if t_next >= horizon:
            fr = flow_state(state, horizon - t, model, epsilon, rk_tol)
            state = fr.state
            clamps += fr.w_clamped
            break
        fr = flow_state(state, t_next - t, model, epsilon, rk_tol)
        state = fr.state
        clamps += fr.w_clamped
        kind = POST if t_post < t_pre else PRE
        _apply_jump(state, kind, model, epsilon, x_jump_cap)
        times.append(t_next)
        kinds.append(kind)
        if n % stride == 0:
            cp_i.append(n)
            cp_rows.append(state.as_array())
        t = t_next
        n += 1

    return Trajectory(model, epsilon, u0.copy(), horizon,
                      np.asarray(times), np.asarray(kinds, dtype=np.int8),
                      np.asarray(cp_i, dtype=np.int64),
                      np.asarray(cp_rows) if cp_rows else np.empty((0, 4 + spec.ell)),
                      state, truncated, clamps, x_jump_cap, seed_info)


def simulate_fast(w: float, model: ValidatedModel, horizon: float, rng=None,
                  u0: SystemState | None = None, epsilon: float = 1.0,
                  **kw) -> Trajectory:
    """Fast subsystem (X, Z) with the weight frozen at w (eps = 1 default)."""
    spec = model.spec
    frozen = replace(spec, weight_update="jump", w_jump_coeff=(0.0,) * spec.ell,
                     kw=(-math.inf, math.inf), name=spec.name + "-fast")
    fm = validated(frozen)
    if u0 is None:
        u0 = SystemState(0.0, np.zeros(spec.ell), 0.0, 0.0, w)
    else:
        u0 = u0.copy()
        u0.w = w
    return simulate(fm, u0, horizon, epsilon, rng, **kw)


# ---------------------------------------------------------------------------
# dominating / truncated variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DominatingConstants:
    """Linear-model constants extracted from the assumption bounds."""

    C_k: float
    C_n: float
    C_M: float
    C_beta: float
    gamma_min: float
    alpha: float

    @classmethod
    def from_model(cls, model: ValidatedModel) -> "DominatingConstants":
        b = model.spec.bounds
        return cls(b.C_k, b.C_n, b.C_M, b.C_beta, model.gamma_min, model.spec.alpha)


def dominating_model(cons: DominatingConstants, lam: float, ell: int,
                     weight_update: str = "drift",
                     jump_coeff_sum: float = 1.0) -> ValidatedModel:
    """One-trace linear system that path-wise dominates the original.

    Activation C_beta(1+x), trace jumps C_k on both spike streams,
    integrator inflow C_n(1 + ell z), weight drift C_M(1+omega).  For
    jump-mode originals the dominating weight jumps eps*(sum c)*Z- at
    post-spikes instead, which dominates eps*<c, Z-> term by term.
    """
    zero = constant(0.0)
    n_all = affine(cons.C_n, cons.C_n * ell) if cons.C_n > 0 else zero
    spec = ModelSpec(
        lam=lam, ell=1, gamma=(cons.gamma_min,), k0=(cons.C_k,),
        k1=(constant(cons.C_k),), k2=(constant(cons.C_k),),
        beta=affine_clipped(cons.C_beta, cons.C_beta) if cons.C_beta > 0 else zero,
        g=zero,
        n=NSpecs(n_all, n_all, n_all, n_all, n_all, n_all),
        alpha=cons.alpha,
        m_p=affine(cons.C_M, cons.C_M) if cons.C_M > 0 else zero,
        m_d=zero, delta=0.0,
        bounds=Bounds(c_beta=1.0, C_beta=cons.C_beta, c_g=0.0, C_k=cons.C_k,
                      C_n=cons.C_n * max(1, ell), C_M=cons.C_M),
        weight_update=weight_update,
        w_jump_coeff=(jump_coeff_sum,) if weight_update == "jump" else None,
        name="dominating",
    )
    return validated(spec)


def dominating_initial(u0: SystemState) -> SystemState:
    """(max(x0,0), max_i z0_i, max_a omega0_a, |w0|)."""
    zbar = float(np.max(u0.z)) if u0.z.size else 0.0
    obar = max(u0.omega_p, u0.omega_d)
    return SystemState(max(u0.x, 0.0), np.array([zbar]), obar, obar, abs(u0.w))


def simulate_dominating(source, u0: SystemState, horizon: float,
                        epsilon: float = 1.0, rng=None, lam: float | None = None,
                        ell: int | None = None, **kw) -> Trajectory:
    """Simulate the dominating linear system from a model or its constants."""
    dom = _as_dominating_model(source, lam, ell)
    return simulate(dom, dominating_initial(u0), horizon, epsilon, rng, **kw)


def simulate_truncated(source, K: float, u0: SystemState, horizon: float,
                       epsilon: float = 1.0, rng=None, lam: float | None = None,
                       ell: int | None = None, **kw) -> Trajectory:
    """Dominating system with pre-spike potential jumps capped at K."""
    if K < 0:
        raise ValueError("truncation level K must be non-negative")
    dom = _as_dominating_model(source, lam, ell)
    return simulate(dom, dominating_initial(u0), horizon, epsilon, rng,
                    x_jump_cap=K, **kw)


def _as_dominating_model(source, lam, ell) -> ValidatedModel:
    if isinstance(source, ValidatedModel):
        if source.spec.name == "dominating":
            return source
        cons = DominatingConstants.from_model(source)
        wu = source.spec.weight_update
        jsum = sum(source.spec.w_jump_coeff) if wu == "jump" else 1.0
        return dominating_model(cons, source.spec.lam, source.spec.ell, wu, jsum)
    if isinstance(source, DominatingConstants):
        if lam is None or ell is None:
            raise ValueError("lam and ell are required with raw constants")
        return dominating_model(source, lam, ell)
    raise TypeError("source must be a ValidatedModel or DominatingConstants")


# ---------------------------------------------------------------------------
# shared-randomness coupling
# ---------------------------------------------------------------------------

@dataclass
class CoupledPair:
    original: Trajectory
    dominating: Trajectory

    def check_order(self, ts, tol: float = 1e-9) -> None:
        """Assert the componentwise order at the given sample times."""
        orig = self.original.sample(ts)
        dom = self.dominating.sample(ts)
        for t, u, ub in zip(ts, orig, dom):
            _assert_order(u, ub, tol, where=f"t={t:g}")


def _assert_order(u: SystemState, ub: SystemState, tol: float, where: str) -> None:
    slack = tol * (1.0 + abs(ub.x) + float(np.max(np.abs(ub.z))) + ub.omega_p + abs(ub.w))
    ok = (u.x <= ub.x + slack
          and float(np.max(u.z)) <= float(ub.z[0]) + slack
          and max(u.omega_p, u.omega_d) <= max(ub.omega_p, ub.omega_d) + slack
          and abs(u.w) <= ub.w + slack)
    if not ok:
        raise CouplingOrderError(f"domination violated at {where}: {u} vs {ub}")


def simulate_coupled(model: ValidatedModel, u0: SystemState, horizon: float,
                     epsilon: float = 1.0, rng=None, *,
                     max_events: int = DEFAULT_EVENT_BUDGET,
                     rk_tol: float = RK_TOL) -> CoupledPair:
    """Drive the original and its dominating twin from one Poisson field.

    Pre-spike epochs are shared; post candidates arrive at the dominating
    envelope and each process accepts with its own intensity against the
    shared mark.  Since beta is non-decreasing and the order holds, the
    original accepts a subset of the dominating acceptances.
    """
    if not model.spec.beta.is_nondecreasing():
        raise ValueError("coupled simulation requires a non-decreasing activation")
    rng = rng_from(rng)
    spec = model.spec
    dom = _as_dominating_model(model, None, None)
    pre_rate = spec.lam / epsilon

    st = u0.copy()
    st.t = 0.0
    sd = dominating_initial(u0)
    sd.t = 0.0
    _assert_order(st, sd, 1e-12, "t=0")

    o_times: list[float] = []
    o_kinds: list[int] = []
    d_times: list[float] = []
    d_kinds: list[int] = []
    o_cpi: list[int] = []
    o_cpr: list[np.ndarray] = []
    d_cpi: list[int] = []
    d_cpr: list[np.ndarray] = []

    t = 0.0
    n = 0
    truncated = False
    while True:
        if n >= max_events:
            truncated = True
            break
        t_pre = t + rng.exponential(1.0 / pre_rate) if pre_rate > 0 else math.inf
        env = dom.post_envelope(sd.x) / epsilon
        t_post = math.inf
        acc_orig = False
        if env > 0.0:
            limit = min(t_pre, horizon)
            s = t
            while True:
                s += rng.exponential(1.0 / env)
                if s >= limit:
                    break
                xo = st.x * math.exp(-(s - t) / epsilon)
                xd = sd.x * math.exp(-(s - t) / epsilon)
                lam_o = model.beta(xo) / epsilon
                lam_d = dom.beta(xd) / epsilon
                if lam_d > env * (1.0 + 1e-12):
                    raise EnvelopeViolation("dominating envelope violated")
                if lam_o > lam_d * (1.0 + 1e-12):
                    raise CouplingOrderError(
                        f"original intensity above dominating at s={s:g}")
                mark = rng.uniform() * env
                if mark <= lam_d:
                    t_post = s
                    acc_orig = mark <= lam_o
                    break
        t_next = min(t_pre, t_post)
        if t_next >= horizon:
            st = flow_state(st, horizon - t, model, epsilon, rk_tol).state
            sd = flow_state(sd, horizon - t, dom, epsilon, rk_tol).state
            break
        st = flow_state(st, t_next - t, model, epsilon, rk_tol).state
        sd = flow_state(sd, t_next - t, dom, epsilon, rk_tol).state
        if t_post < t_pre:
            _apply_jump(sd, POST, dom, epsilon)
            d_times.append(t_next)
            d_kinds.append(POST)
            if acc_orig:
                _apply_jump(st, POST, model, epsilon)
                o_times.append(t_next)
                o_kinds.append(POST)
        else:
            _apply_jump(st, PRE, model, epsilon)
            _apply_jump(sd, PRE, dom, epsilon)
            o_times.append(t_next)
            o_kinds.append(PRE)
            d_times.append(t_next)
            d_kinds.append(PRE)
        if o_times and (not o_cpi or o_cpi[-1] != len(o_times) - 1):
            o_cpi.append(len(o_times) - 1)
            o_cpr.append(st.as_array())
        d_cpi.append(len(d_times) - 1)
        d_cpr.append(sd.as_array())
        _assert_order(st, sd, 1e-9, f"event at t={t_next:g}")
        t = t_next
        n += 1

    orig = Trajectory(model, epsilon, u0.copy(), horizon, np.asarray(o_times),
                      np.asarray(o_kinds, dtype=np.int8),
                      np.asarray(o_cpi, dtype=np.int64),
                      np.asarray(o_cpr) if o_cpr else np.empty((0, 4 + spec.ell)),
                      st, truncated)
    domt = Trajectory(dom, epsilon, dominating_initial(u0), horizon,
                      np.asarray(d_times), np.asarray(d_kinds, dtype=np.int8),
                      np.asarray(d_cpi, dtype=np.int64),
                      np.asarray(d_cpr) if d_cpr else np.empty((0, 5)),
                      sd, truncated)
    return CoupledPair(orig, domt)


# ---------------------------------------------------------------------------
# occupation-measure functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyFunctional:
    """G(x, z) = c0 + cx x + cxx x^2 + <cz, z> + x <cxz, z>."""

    c0: float = 0.0
    cx: float = 0.0
    cxx: float = 0.0
    cz: np.ndarray | None = None
    cxz: np.ndarray | None = None

    def eval(self, x: float, z: np.ndarray) -> float:
        out = self.c0 + self.cx * x + self.cxx * x * x
        if self.cz is not None:
            out += float(np.dot(self.cz, z))
        if self.cxz is not None:
            out += x * float(np.dot(self.cxz, z))
        return out


@dataclass(frozen=True)
class BetaWeighted:
    """G(x, z) = beta(x) * (c0 + <cz, z>), exact for (clipped) affine beta."""

    c0: float = 0.0
    cz: np.ndarray | None = None

    def eval(self, model: ValidatedModel, x: float, z: np.ndarray) -> float:
        inner = self.c0 + (float(np.dot(self.cz, z)) if self.cz is not None else 0.0)
        return model.beta(x) * inner


def _em1(u: float) -> float:
    return -math.expm1(-u)  # 1 - e^{-u}, accurate for small u


def _poly_piece(model: ValidatedModel, eps: float, x0: float, z0: np.ndarray,
                d: float, g: PolyFunctional) -> float:
    """Exact integral of a PolyFunctional along one inter-jump flow piece."""
    kb, gam = model.kbar, model.gamma
    a = z0 - kb
    out = g.c0 * d
    if g.cx:
        out += g.cx * x0 * eps * _em1(d / eps)
    if g.cxx:
        out += g.cxx * x0 * x0 * (eps / 2.0) * _em1(2.0 * d / eps)
    if g.cz is not None:
        iz = kb * d + a * (eps / gam) * (-np.expm1(-gam * d / eps))
        out += float(np.dot(g.cz, iz))
    if g.cxz is not None:
        ixz = x0 * kb * eps * _em1(d / eps) \
            + x0 * a * (eps / (1.0 + gam)) * (-np.expm1(-(1.0 + gam) * d / eps))
        out += float(np.dot(g.cxz, ixz))
    return out


def _beta_active_window(model: ValidatedModel, eps: float, x0: float,
                        d: float) -> list[tuple[float, float]]:
    """Sub-intervals of [0, d) where a clipped-affine activation is positive."""
    f = model.spec.beta
    if f.kind == "constant":
        return [(0.0, d)] if f.coeffs[0] > 0 else []
    aa, bb = f.coeffs
    if bb == 0.0:
        return [(0.0, d)] if aa > 0 else []
    cut = -aa / bb
    if x0 > 0.0:
        if cut < 0.0:
            return [(0.0, d)]
        if x0 <= cut:
            return []
        s_star = eps * math.log(x0 / cut) if cut > 0 else d
        return [(0.0, min(d, s_star))]
    if x0 == 0.0:
        return [(0.0, d)] if aa > 0 else []
    if cut >= 0.0:
        return []
    if x0 > cut:
        return [(0.0, d)]
    s_star = eps * math.log(x0 / cut)
    return [(s_star, d)] if s_star < d else []


def _beta_piece(model: ValidatedModel, eps: float, x0: float, z0: np.ndarray,
                d: float, g: BetaWeighted) -> float:
    f = model.spec.beta
    if f.kind in ("constant", "affine", "affine_clipped"):
        if f.kind == "constant":
            aa, bb = f.coeffs[0], 0.0
        else:
            aa, bb = f.coeffs
        windows = ([(0.0, d)] if f.kind == "affine"
                   else _beta_active_window(model, eps, x0, d))
        cz = g.cz
        poly = PolyFunctional(c0=aa * g.c0, cx=bb * g.c0,
                              cz=None if cz is None else aa * cz,
                              cxz=None if cz is None else bb * cz)
        total = 0.0
        for s1, s2 in windows:
            if s2 <= s1:
                continue
            x1 = x0 * math.exp(-s1 / eps)
            z1 = model.kbar + (z0 - model.kbar) * np.exp(-model.gamma * s1 / eps)
            total += _poly_piece(model, eps, x1, z1, s2 - s1, poly)
        return total

    def integrand(s):
        xs = x0 * math.exp(-s / eps)
        zs = model.kbar + (z0 - model.kbar) * np.exp(-model.gamma * s / eps)
        return g.eval(model, xs, zs)

    val, _ = quad(integrand, 0.0, d, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def functional_from_spec(f, ell: int):
    """Adapt a declared scalar rule over (x, z) to an occupation functional.

    The rule's weight vector (length 1 + ell) reduces (x, z) to a scalar;
    affine rules integrate exactly, the rest fall back to quadrature.
    """
    from .functions import FunctionSpec

    if not isinstance(f, FunctionSpec):
        raise TypeError("expected a FunctionSpec")
    wts = np.asarray(f.weights if f.weights is not None else (1.0,) * (1 + ell))
    if wts.size != 1 + ell:
        raise ValueError("weights must cover (x, z_1..z_ell)")
    aff = f.as_affine()
    if aff is not None:
        a0, b = aff
        return PolyFunctional(c0=a0, cx=b * wts[0], cz=b * wts[1:])
    return lambda x, z: f.scalar(wts[0] * x + float(np.dot(wts[1:], z)))


def _piece_value(model: ValidatedModel, eps: float, state: SystemState,
                 d: float, g) -> float:
    if isinstance(g, PolyFunctional):
        return _poly_piece(model, eps, state.x, state.z, d, g)
    if isinstance(g, BetaWeighted):
        return _beta_piece(model, eps, state.x, state.z, d, g)
    from .functions import FunctionSpec

    if isinstance(g, FunctionSpec):
        return _piece_value(model, eps, state, d,
                            functional_from_spec(g, model.spec.ell))
    if not callable(g):
        raise TypeError("g must be PolyFunctional, BetaWeighted, a FunctionSpec, "
                        "or callable")
    takes_time = len(inspect.signature(g).parameters) == 3
    x0, z0, ts = state.x, state.z, state.t

    def integrand(s):
        xs = x0 * math.exp(-s / eps)
        zs = model.kbar + (z0 - model.kbar) * np.exp(-model.gamma * s / eps)
        return g(ts + s, xs, zs) if takes_time else g(xs, zs)

    val, _ = quad(integrand, 0.0, d, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def occupation_functional(traj: Trajectory, g, t0: float = 0.0,
                          t1: float | None = None) -> float:
    """int_{t0}^{t1} G(s, X(s), Z(s)) ds, exactly between events.

    ``g`` may be a PolyFunctional or BetaWeighted (integrated in closed
    form along the exponential flows) or a callable of (x, z) or
    (s, x, z) (adaptive quadrature per piece).
    """
    if t1 is None:
        t1 = traj.horizon
    total = 0.0
    for state, d in traj.pieces(t0, t1):
        total += _piece_value(traj.model, traj.epsilon, state, d, g)
    return total


def occupation_functionals(traj: Trajectory, gs: dict, t0: float = 0.0,
                           t1: float | None = None) -> dict:
    """Several functionals in one pass over the inter-event pieces."""
    if t1 is None:
        t1 = traj.horizon
    totals = {name: 0.0 for name in gs}
    for state, d in traj.pieces(t0, t1):
        for name, g in gs.items():
            totals[name] += _piece_value(traj.model, traj.epsilon, state, d, g)
    return totals
