"""Integer-valued plasticity model: hybrid chain with continuous integrators.

Potential, traces, and weight are quanta; each quantum leaks through its
own exponential clock, so aggregated transition rates from state
(x, z, om_p, om_d, w) are

    pre-spike   lambda/eps      x += w, z += B1, om_a += eps n_a1(z-)
    x-leak      x/eps           x -= 1
    post-spike  beta x/eps      x -= 1, z += B2, om_a += eps n_a2(z-)
    z-leak      gamma z_i/eps   z_i -= 1
    w-leak      delta w         w -= 1
    potentiate  om_p(t)         w += A_p
    depress     om_d(t) 1{w >= A_d}   w -= A_d

The integrators stay continuous: between events they relax toward
n_a0(z)/alpha (the inflow is constant there because z is), so their flow
is closed-form and the two weight-update rates are sampled by thinning
against the envelope max(om_a, n_a0(z)/alpha), refreshed at every event.

The frozen-weight chain, its stationary functionals, the jump-ODE limit
process with a cached invariant-functional table, and a shared-randomness
dominating pair are provided alongside.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace

import numpy as np

from .model import NSpecs
from .util import keyed_seed, parallel_map, replica_seeds, rng_from

PRE, POST, XLEAK, ZLEAK, WLEAK, WPOT, WDEP = range(7)
KIND_NAMES = {PRE: "pre", POST: "post", XLEAK: "x-leak", ZLEAK: "z-leak",
              WLEAK: "w-leak", WPOT: "w-pot", WDEP: "w-dep"}
DEFAULT_EVENT_BUDGET = 10_000_000


class PsiCacheBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteParams:
    lam: float
    beta: float
    gamma: float
    delta: float
    alpha: float
    B1: tuple[int, ...]
    B2: tuple[int, ...]
    A_p: int
    A_d: int
    n: NSpecs
    C_n: float
    name: str = "discrete"

    @property
    def ell(self) -> int:
        return len(self.B1)

    def __post_init__(self):
        if self.gamma <= 0 or self.alpha <= 0:
            raise ValueError("gamma and alpha must be positive")
        if min(self.lam, self.beta, self.delta, self.C_n) < 0:
            raise ValueError("rates must be non-negative")
        if len(self.B2) != len(self.B1):
            raise ValueError("B1 and B2 must have equal length")
        if any(b < 0 for b in self.B1 + self.B2) or self.A_p < 0 or self.A_d < 0:
            raise ValueError("jump amplitudes must be non-negative integers")

    def n_eval(self, a: str, j: int, z: np.ndarray) -> float:
        f = self.n.get(a, j)
        if f.kind == "constant":
            return f.coeffs[0]
        if f.weights is not None:
            return f.scalar(float(np.dot(f.weights, z)))
        if self.ell == 1:
            return f.scalar(float(z[0]))
        raise ValueError("vector-input rule needs declared reduction weights")


@dataclass
class DiscreteState:
    x: int
    z: np.ndarray
    omega_p: float
    omega_d: float
    w: int
    t: float = 0.0

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=np.int64))
        if self.x < 0 or self.w < 0 or np.any(self.z < 0):
            raise ValueError("x, z, w must be non-negative integers")

    def copy(self) -> "DiscreteState":
        return DiscreteState(self.x, self.z.copy(), self.omega_p, self.omega_d,
                             self.w, self.t)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.x], self.z, [self.omega_p, self.omega_d, self.w]))


def _relax(om: float, target: float, alpha: float, dt: float) -> float:
    return target + (om - target) * math.exp(-alpha * dt)


def _flow_omegas(state: DiscreteState, params: DiscreteParams, dt: float) -> None:
    np0 = params.n_eval("p", 0, state.z)
    nd0 = params.n_eval("d", 0, state.z)
    state.omega_p = _relax(state.omega_p, np0 / params.alpha, params.alpha, dt)
    state.omega_d = _relax(state.omega_d, nd0 / params.alpha, params.alpha, dt)
    state.t += dt


def _apply(state: DiscreteState, kind: int, detail: int,
           params: DiscreteParams, epsilon: float) -> None:
    z_pre = state.z
    if kind == PRE:
        state.x += state.w
        state.omega_p += epsilon * params.n_eval("p", 1, z_pre)
        state.omega_d += epsilon * params.n_eval("d", 1, z_pre)
        state.z = z_pre + np.asarray(params.B1, dtype=np.int64)
    elif kind == POST:
        state.x -= 1
        state.omega_p += epsilon * params.n_eval("p", 2, z_pre)
        state.omega_d += epsilon * params.n_eval("d", 2, z_pre)
        state.z = z_pre + np.asarray(params.B2, dtype=np.int64)
    elif kind == XLEAK:
        state.x -= 1
    elif kind == ZLEAK:
        state.z = z_pre.copy()
        state.z[detail] -= 1
    elif kind == WLEAK:
        state.w -= 1
    elif kind == WPOT:
        state.w += params.A_p
    elif kind == WDEP:
        state.w -= params.A_d
    if state.x < 0 or state.w < 0 or np.any(state.z < 0):
        raise AssertionError("negative quantum count after jump")


@dataclass
class DiscreteTrajectory:
    params: DiscreteParams
    epsilon: float
    u0: DiscreteState
    horizon: float
    times: np.ndarray
    kinds: np.ndarray
    details: np.ndarray
    cp_index: np.ndarray
    cp_states: np.ndarray
    final_state: DiscreteState
    truncated: bool = False

    @property
    def n_events(self) -> int:
        return len(self.times)

    def event_times(self, kind: int) -> np.ndarray:
        return self.times[self.kinds == kind]

    def _unpack(self, row: np.ndarray, t: float) -> DiscreteState:
        ell = self.params.ell
        return DiscreteState(int(row[0]), row[1:1 + ell].astype(np.int64),
                             row[1 + ell], row[2 + ell], int(row[3 + ell]), t)

    def state_after_event(self, i: int) -> DiscreteState:
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
        for m in range(j + 1, i + 1):
            _flow_omegas(state, self.params, self.times[m] - state.t)
            _apply(state, int(self.kinds[m]), int(self.details[m]),
                   self.params, self.epsilon)
        return state

    def state_at(self, t: float) -> DiscreteState:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        state = self.state_after_event(i)
        _flow_omegas(state, self.params, t - state.t)
        return state

    def pieces(self, t0: float = 0.0, t1: float | None = None):
        if t1 is None:
            t1 = self.horizon
        state = self.state_at(t0)
        lo = int(np.searchsorted(self.times, t0, side="right"))
        hi = int(np.searchsorted(self.times, t1, side="left"))
        t = t0
        for i in range(lo, hi):
            ti = float(self.times[i])
            if ti > t:
                yield state, ti - t
            _flow_omegas(state, self.params, ti - state.t)
            _apply(state, int(self.kinds[i]), int(self.details[i]),
                   self.params, self.epsilon)
            t = ti
        if t1 > t:
            yield state, t1 - t

    def time_average(self, f, t0: float, t1: float | None = None) -> float:
        """Exact time average of f(x, z): the state is constant per piece."""
        if t1 is None:
            t1 = self.horizon
        total = 0.0
        for state, d in self.pieces(t0, t1):
            total += f(state.x, state.z) * d
        return total / (t1 - t0)


def simulate_discrete(params: DiscreteParams, u0: DiscreteState, horizon: float,
                      epsilon: float = 1.0, rng=None, *,
                      max_events: int = DEFAULT_EVENT_BUDGET,
                      stride: int = 1) -> DiscreteTrajectory:
    """Exact hybrid simulation by competing clocks plus integrator thinning."""
    if not (0 < epsilon <= 1.0):
        raise ValueError("epsilon must lie in (0, 1]")
    rng = rng_from(rng)
    state = u0.copy()
    state.t = 0.0
    times: list[float] = []
    kinds: list[int] = []
    details: list[int] = []
    cp_i: list[int] = []
    cp_rows: list[np.ndarray] = []
    truncated = False
    t = 0.0
    iters = 0
    while True:
        if iters >= max_events:
            truncated = True
            break
        iters += 1
        np0 = params.n_eval("p", 0, state.z)
        nd0 = params.n_eval("d", 0, state.z)
        r_pre = params.lam / epsilon
        r_xleak = state.x / epsilon
        r_post = params.beta * state.x / epsilon
        r_zleak = params.gamma * state.z / epsilon
        r_wleak = params.delta * state.w
        env_p = max(state.omega_p, np0 / params.alpha) if params.A_p > 0 else 0.0
        env_d = (max(state.omega_d, nd0 / params.alpha)
                 if params.A_d > 0 and state.w >= params.A_d else 0.0)
        total = (r_pre + r_xleak + r_post + float(np.sum(r_zleak))
                 + r_wleak + env_p + env_d)
        if total <= 0.0:
            _flow_omegas(state, params, horizon - t)
            break
        dt = rng.exponential(1.0 / total)
        if t + dt >= horizon:
            _flow_omegas(state, params, horizon - t)
            break
        t += dt
        _flow_omegas(state, params, t - state.t)
        u = rng.uniform() * total
        kind, detail = None, -1
        acc = r_pre
        if u < acc:
            kind = PRE
        else:
            for cand, code in ((r_xleak, XLEAK), (r_post, POST)):
                if u < acc + cand:
                    kind = code
                    break
                acc += cand
            if kind is None:
                for i, rz in enumerate(r_zleak):
                    if u < acc + rz:
                        kind, detail = ZLEAK, i
                        break
                    acc += rz
            if kind is None and u < acc + r_wleak:
                kind = WLEAK
            elif kind is None:
                acc += r_wleak
                if u < acc + env_p:
                    # thinning: accept with probability omega_p(t)/env_p
                    if u - acc <= state.omega_p:
                        kind = WPOT
                else:
                    acc += env_p
                    if u - acc <= state.omega_d:
                        kind = WDEP
        if kind is None:
            continue  # rejected integrator candidate, no state change
        _apply(state, kind, detail, params, epsilon)
        times.append(t)
        kinds.append(kind)
        details.append(detail)
        n = len(times) - 1
        if n % stride == 0:
            cp_i.append(n)
            cp_rows.append(state.as_array())

    return DiscreteTrajectory(params, epsilon, u0.copy(), horizon,
                              np.asarray(times), np.asarray(kinds, dtype=np.int8),
                              np.asarray(details, dtype=np.int32),
                              np.asarray(cp_i, dtype=np.int64),
                              np.asarray(cp_rows) if cp_rows else
                              np.empty((0, 4 + params.ell)),
                              state, truncated)


def simulate_discrete_fast(w: int, params: DiscreteParams, horizon: float,
                           rng=None, u0: DiscreteState | None = None,
                           **kw) -> DiscreteTrajectory:
    """Frozen-weight chain on (x, z): leak/spike clocks only."""
    frozen = replace(params, delta=0.0, A_p=0, A_d=0, name=params.name + "-fast")
    if u0 is None:
        u0 = DiscreteState(0, np.zeros(params.ell, dtype=np.int64), 0.0, 0.0, int(w))
    else:
        u0 = u0.copy()
        u0.w = int(w)
    return simulate_discrete(frozen, u0, horizon, 1.0, rng, **kw)


def psi_functional(params: DiscreteParams, a: str):
    """f(x, z) = n_a0(z) + lambda n_a1(z) + beta x n_a2(z)."""

    def f(x, z):
        return (params.n_eval(a, 0, z) + params.lam * params.n_eval(a, 1, z)
                + params.beta * x * params.n_eval(a, 2, z))

    return f


def _psi_replica(args):
    params, w, horizon, burnin, seed = args
    traj = simulate_discrete_fast(w, params, horizon, seed)
    return (traj.time_average(psi_functional(params, "p"), burnin),
            traj.time_average(psi_functional(params, "d"), burnin))


def estimate_discrete_psi(w: int, params: DiscreteParams, horizon: float,
                          burnin: float, replicas: int, seed,
                          workers: int = 1) -> tuple[float, float]:
    rows = parallel_map(_psi_replica,
                        [(params, w, horizon, burnin, s)
                         for s in replica_seeds(seed, replicas)],
                        workers=workers)
    arr = np.array(rows)
    return float(arr[:, 0].mean()), float(arr[:, 1].mean())


@dataclass
class DiscreteLimitPath:
    """Hybrid limit path: integer weight jumps, relaxing integrators."""

    params: DiscreteParams
    w0: int
    horizon: float
    times: np.ndarray
    kinds: np.ndarray
    w: np.ndarray                 # weight after each event
    omega_p: np.ndarray
    omega_d: np.ndarray
    psi_cache: dict
    truncated: bool = False

    def w_at(self, t: float) -> int:
        k = bisect_right(self.times, t)
        return self.w0 if k == 0 else int(self.w[k - 1])


def simulate_discrete_limit(params: DiscreteParams, w0: int, horizon: float,
                            seed=0, *, psi_replicas: int = 16,
                            psi_horizon: float | None = None,
                            psi_burnin: float | None = None,
                            omega0: tuple[float, float] = (0.0, 0.0),
                            cache_cap: int = 256, workers: int = 1,
                            psi_table: dict | None = None,
                            max_events: int = DEFAULT_EVENT_BUDGET) -> DiscreteLimitPath:
    """Limit process: w jumps against integrators driven by cached Pi_w tables.

    The invariant functionals Psi_a(w) are estimated on demand from the
    frozen-weight chain and cached per integer w with a seed keyed by w,
    so reruns with the same seed reproduce the path bit-identically.  A
    precomputed ``psi_table`` may be shared across replicas.
    """
    if psi_burnin is None:
        psi_burnin = 20.0 / min(1.0, params.gamma, 1.0)
    if psi_horizon is None:
        psi_horizon = 20.0 * psi_burnin
    seed_int = (int(seed) if not isinstance(seed, np.random.SeedSequence)
                else int(seed.generate_state(1)[0]))
    rng = rng_from(keyed_seed(seed_int, 0xD15C))
    cache: dict[int, tuple[float, float]] = dict(psi_table or {})

    def psi(w: int) -> tuple[float, float]:
        if w not in cache:
            if len(cache) >= cache_cap:
                raise PsiCacheBudgetExceeded(
                    f"more than {cache_cap} distinct weights visited; "
                    f"raise cache_cap or shorten the horizon")
            cache[w] = estimate_discrete_psi(
                w, params, psi_horizon, psi_burnin, psi_replicas,
                keyed_seed(seed_int, 0xF5, w), workers=workers)
        return cache[w]

    t = 0.0
    w = int(w0)
    op, od = omega0
    times: list[float] = []
    kinds: list[int] = []
    ws: list[int] = []
    ops: list[float] = []
    ods: list[float] = []
    truncated = False
    iters = 0
    while True:
        if iters >= max_events:
            truncated = True
            break
        iters += 1
        pp, pd_ = psi(w)
        r_wleak = params.delta * w
        env_p = max(op, pp / params.alpha) if params.A_p > 0 else 0.0
        env_d = (max(od, pd_ / params.alpha)
                 if params.A_d > 0 and w >= params.A_d else 0.0)
        total = r_wleak + env_p + env_d
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt >= horizon:
            break
        t += dt
        op = _relax(op, pp / params.alpha, params.alpha, dt)
        od = _relax(od, pd_ / params.alpha, params.alpha, dt)
        u = rng.uniform() * total
        if u < r_wleak:
            kind = WLEAK
            w -= 1
        elif u < r_wleak + env_p:
            if u - r_wleak > op:
                continue
            kind = WPOT
            w += params.A_p
        else:
            if u - r_wleak - env_p > od:
                continue
            if w < params.A_d:
                raise AssertionError("depression fired below the guard")
            kind = WDEP
            w -= params.A_d
        if w < 0:
            raise AssertionError("negative weight in the limit path")
        times.append(t)
        kinds.append(kind)
        ws.append(w)
        ops.append(op)
        ods.append(od)

    return DiscreteLimitPath(params, int(w0), horizon, np.asarray(times),
                             np.asarray(kinds, dtype=np.int8),
                             np.asarray(ws, dtype=np.int64),
                             np.asarray(ops), np.asarray(ods), cache, truncated)


# ---------------------------------------------------------------------------
# shared-randomness dominating pair
# ---------------------------------------------------------------------------

def simulate_discrete_coupled(params: DiscreteParams, u0: DiscreteState,
                              horizon: float, epsilon: float = 1.0, rng=None, *,
                              max_events: int = DEFAULT_EVENT_BUDGET):
    """Original and dominating discrete paths from one clock realization.

    Candidates run at the dominating rates; the original accepts each leak
    or post candidate with probability (its own count)/(dominating count),
    and integrator-driven potentiation shares one mark.  The dominating
    weight only potentiates, so W(t) <= Wbar(t) path-wise.
    """
    rng = rng_from(rng)
    s = u0.copy()
    s.t = 0.0
    sb = u0.copy()
    sb.t = 0.0
    sb.omega_p = sb.omega_d = max(u0.omega_p, u0.omega_d)
    t = 0.0
    iters = 0
    w_hist: list[tuple[float, int, int]] = [(0.0, s.w, sb.w)]
    while iters < max_events:
        iters += 1
        np0 = params.n_eval("p", 0, s.z)
        nd0 = params.n_eval("d", 0, s.z)
        r_pre = params.lam / epsilon
        r_xleak = sb.x / epsilon
        r_post = params.beta * sb.x / epsilon
        r_zleak = params.gamma * sb.z / epsilon
        r_wleak = params.delta * s.w
        env_p = (max(sb.omega_p, params.C_n / params.alpha)
                 if params.A_p > 0 else 0.0)
        env_d = (max(s.omega_d, nd0 / params.alpha)
                 if params.A_d > 0 and s.w >= params.A_d else 0.0)
        total = (r_pre + r_xleak + r_post + float(np.sum(r_zleak))
                 + r_wleak + env_p + env_d)
        if total <= 0.0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt >= horizon:
            break
        t += dt
        _flow_omegas(s, params, t - s.t)
        sb.omega_p = _relax(sb.omega_p, params.C_n / params.alpha, params.alpha,
                            t - sb.t)
        sb.omega_d = sb.omega_p
        sb.t = t
        u = rng.uniform() * total
        changed = False
        if u < r_pre:
            _apply(s, PRE, -1, params, epsilon)
            sb.x += sb.w
            sb.z = sb.z + np.asarray(params.B1, dtype=np.int64)
            sb.omega_p += epsilon * params.C_n
            sb.omega_d = sb.omega_p
            changed = True
        else:
            acc = r_pre
            if u < acc + r_xleak:
                sb.x -= 1
                if (u - acc) * 1.0 <= s.x / epsilon:
                    s.x -= 1
                changed = True
            else:
                acc += r_xleak
                if u < acc + r_post:
                    if (u - acc) <= params.beta * s.x / epsilon:
                        _apply(s, POST, -1, params, epsilon)
                    sb.x -= 1
                    sb.z = sb.z + np.asarray(params.B2, dtype=np.int64)
                    sb.omega_p += epsilon * params.C_n
                    sb.omega_d = sb.omega_p
                    changed = True
                else:
                    acc += r_post
                    hit = False
                    for i, rz in enumerate(np.atleast_1d(r_zleak)):
                        if u < acc + rz:
                            sb_zi = sb.z.copy()
                            sb_zi[i] -= 1
                            sb.z = sb_zi
                            if (u - acc) <= params.gamma * s.z[i] / epsilon:
                                zi = s.z.copy()
                                zi[i] -= 1
                                s.z = zi
                            hit = changed = True
                            break
                        acc += rz
                    if not hit:
                        if u < acc + r_wleak:
                            s.w -= 1
                            changed = True
                        else:
                            acc += r_wleak
                            if u < acc + env_p:
                                mark = u - acc
                                if mark <= sb.omega_p:
                                    sb.w += params.A_p
                                    changed = True
                                if mark <= s.omega_p:
                                    s.w += params.A_p
                                    changed = True
                            else:
                                acc += env_p
                                if u - acc <= s.omega_d:
                                    if s.w < params.A_d:
                                        raise AssertionError("guarded depression fired")
                                    s.w -= params.A_d
                                    changed = True
        if changed:
            w_hist.append((t, s.w, sb.w))
        if not (s.x <= sb.x and np.all(s.z <= sb.z) and s.w <= sb.w
                and max(s.omega_p, s.omega_d) <= sb.omega_p + 1e-9):
            raise AssertionError(f"discrete domination violated at t={t:g}")
    return s, sb, np.array(w_hist, dtype=float)
