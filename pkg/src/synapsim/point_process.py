"""Driving randomness: Poisson streams, thinning, and shot-noise processes.

The post-synaptic spike train is sampled by mark-based thinning: candidate
epochs arrive at a constant envelope rate and a uniform mark accepts each
candidate with probability intensity/envelope.  This realizes the planar
Poisson construction of the state-dependent stream literally, so the same
candidate+mark stream can drive two processes at once (the coupling).

The shot-noise process

    S_eps(t) = x0 exp(-t/eps) + sum_{s_i <= t} exp(-(t - s_i)/eps)

over a Poisson(lambda/eps) stream, and its filtered companion R_eps
(jumps +1 at rate S_eps(t-)/eps, decays at rate gamma/eps), come with an
analytic oracle: the Laplace functional

    E[exp(xi S(t))] = exp(-lambda int_0^{t/eps} (1 - exp(xi e^{-s})) ds),

evaluated here by adaptive quadrature (substituting u = e^{-s} for
infinite horizons).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .util import rng_from

__all__ = [
    "EventStream",
    "ShotNoisePath",
    "InteractingShotNoisePath",
    "EnvelopeViolation",
    "sample_homogeneous",
    "next_jump_thinned",
    "simulate_shot_noise",
    "shot_noise_laplace",
    "shot_noise_mean",
    "simulate_interacting_shot_noise",
    "poisson_integral_fourth_moment",
]


class EnvelopeViolation(RuntimeError):
    """The claimed envelope was below the intensity at a candidate epoch."""


@dataclass(frozen=True)
class EventStream:
    """Strictly increasing epochs, optionally with uniform (0,1) marks."""

    times: np.ndarray
    marks: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("event times must be strictly increasing")
        if self.marks is not None:
            m = np.asarray(self.marks, dtype=float)
            object.__setattr__(self, "marks", m)
            if m.shape != t.shape:
                raise ValueError("one mark per event required")
            if m.size and (m.min() <= 0.0 or m.max() >= 1.0):
                raise ValueError("marks must lie in (0,1)")

    def __len__(self):
        return len(self.times)


def _open_uniform(rng, size: int) -> np.ndarray:
    m = rng.uniform(size=size)
    m[m == 0.0] = np.finfo(float).tiny
    return m


def sample_homogeneous(rate: float, horizon: float, rng, with_marks: bool = False,
                       t0: float = 0.0) -> EventStream:
    """Poisson(rate) epochs on (t0, t0+horizon], i.i.d. exponential gaps."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = rng_from(rng)
    if rate == 0.0:
        return EventStream(np.empty(0), np.empty(0) if with_marks else None)
    parts = []
    t = t0
    end = t0 + horizon
    block = max(16, int(rate * horizon * 1.2) + 16)
    while True:
        cum = t + np.cumsum(rng.exponential(1.0 / rate, size=block))
        inside = cum[cum <= end]
        parts.append(inside)
        if inside.size < block:
            break
        t = cum[-1]
    times = np.concatenate(parts)
    marks = _open_uniform(rng, times.size) if with_marks else None
    return EventStream(times, marks)


def next_jump_thinned(envelope: float, intensity, t0: float, rng,
                      horizon: float = math.inf) -> float | None:
    """First epoch after t0 of the stream with the given intensity.

    Candidates arrive at the constant ``envelope`` rate; the caller
    guarantees intensity(t) <= envelope on the lookahead window.  Returns
    None when no candidate is accepted before ``horizon``.
    """
    if envelope < 0:
        raise ValueError("envelope must be non-negative")
    rng = rng_from(rng)
    if envelope == 0.0:
        return None
    t = t0
    while True:
        t += rng.exponential(1.0 / envelope)
        if t >= horizon:
            return None
        lam = intensity(t)
        if lam > envelope * (1.0 + 1e-12):
            raise EnvelopeViolation(f"intensity {lam:g} exceeds envelope {envelope:g} at t={t:g}")
        if rng.uniform() * envelope <= lam:
            return t


@dataclass(frozen=True)
class ShotNoisePath:
    """Piecewise record of S_eps; exact exponential decay between jumps."""

    epsilon: float
    lam: float
    x0: float
    horizon: float
    times: np.ndarray  # jump epochs

    def left_edge_values(self) -> np.ndarray:
        """Path value just after each of 0 and the jump epochs."""
        eps = self.epsilon
        vals = np.empty(len(self.times) + 1)
        vals[0] = self.x0
        prev_t = 0.0
        for k, tk in enumerate(self.times):
            vals[k + 1] = vals[k] * math.exp(-(tk - prev_t) / eps) + 1.0
            prev_t = tk
        return vals

    def value_at(self, t: float) -> float:
        k = bisect_right(self.times, t)
        out = self.x0 * math.exp(-t / self.epsilon)
        if k:
            out += float(np.exp(-(t - self.times[:k]) / self.epsilon).sum())
        return out

    def value(self, t) -> np.ndarray:
        return np.array([self.value_at(ti) for ti in np.atleast_1d(np.asarray(t, dtype=float))])

    def filtered_integral(self, rate: float, t: float) -> float:
        """int_0^t exp(-rate (t-u)) S_eps(u) du, exactly, piece by piece.

        On each inter-jump piece [a, b] the path is s_a exp(-(u-a)/eps),
        contributing s_a exp(-rate(t-a)) (exp(r d)-1)/r with
        r = rate - 1/eps and d = b - a.
        """
        eps = self.epsilon
        k = bisect_right(self.times, t)
        knots = np.concatenate([[0.0], self.times[:k], [t]])
        edge = self.left_edge_values()[: k + 1]
        r = rate - 1.0 / eps
        total = 0.0
        for i in range(len(knots) - 1):
            a, d = knots[i], knots[i + 1] - knots[i]
            s_a = edge[i]
            if d == 0.0:
                continue
            seg = d if abs(r) < 1e-14 else math.expm1(r * d) / r
            total += s_a * math.exp(-rate * (t - a)) * seg
        return total


def simulate_shot_noise(epsilon: float, lam: float, x0: float, horizon: float,
                        rng) -> ShotNoisePath:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if lam == 0.0:
        return ShotNoisePath(epsilon, lam, x0, horizon, np.empty(0))
    ev = sample_homogeneous(lam / epsilon, horizon, rng)
    return ShotNoisePath(epsilon, lam, x0, horizon, ev.times)


def shot_noise_laplace(xi: float, t: float, lam: float, epsilon: float = 1.0,
                       tol: float = 1e-10) -> float:
    """E[exp(xi S_eps(t))] for the zero-start path, by adaptive quadrature.

    The exponent is -lam * int_0^{t/eps} (1 - exp(xi e^{-s})) ds; the
    substitution u = e^{-s} maps it to int (1 - exp(xi u))/u du over
    [exp(-t/eps), 1], finite even for t = +inf.
    """
    if xi == 0.0:
        return 1.0
    T = math.inf if math.isinf(t) else t / epsilon

    def integrand_u(u):
        return -math.expm1(xi * u) / u if u > 0 else -xi

    lo = 0.0 if math.isinf(T) else math.exp(-T)
    val, err = quad(integrand_u, lo, 1.0, epsabs=tol, epsrel=tol, limit=200)
    if err > max(tol, abs(val) * tol) * 10:
        raise RuntimeError(f"quadrature did not converge: err={err:g}")
    return math.exp(-lam * val)


def shot_noise_mean(t: float, lam: float, epsilon: float = 1.0, x0: float = 0.0) -> float:
    """E[S^x_eps(t)] = x0 exp(-t/eps) + lam (1 - exp(-t/eps))."""
    if math.isinf(t):
        return lam
    d = math.exp(-t / epsilon)
    return x0 * d + lam * (1.0 - d)


@dataclass(frozen=True)
class InteractingShotNoisePath:
    """Joint path of the driving S_eps and the filtered R_eps."""

    s_path: ShotNoisePath
    epsilon: float
    gamma: float
    r_times: np.ndarray  # accepted jump epochs of R

    def r_value_at(self, t: float) -> float:
        k = bisect_right(self.r_times, t)
        if k == 0:
            return 0.0
        return float(np.exp(-self.gamma * (t - self.r_times[:k]) / self.epsilon).sum())

    def conditional_r_mean(self, t: float) -> float:
        """E[R_eps(t) | S] = int_0^t e^{-gamma(t-u)/eps} S(u)/eps du."""
        return self.s_path.filtered_integral(self.gamma / self.epsilon, t) / self.epsilon


def simulate_interacting_shot_noise(epsilon: float, lam: float, gamma: float,
                                    horizon: float, rng) -> InteractingShotNoisePath:
    """R_eps jumps +1 at the thinned stream of intensity S_eps(t-)/eps.

    S decays between its own jumps, so the envelope S(last jump)/eps is
    valid on each inter-jump interval of S and is refreshed there.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rng = rng_from(rng)
    s_path = simulate_shot_noise(epsilon, lam, 0.0, horizon, rng)
    edge = s_path.left_edge_values()
    knots = np.concatenate([[0.0], s_path.times, [horizon]])
    r_times: list[float] = []
    exp = rng.exponential
    uni = rng.uniform
    for k in range(len(knots) - 1):
        a, b = knots[k], knots[k + 1]
        s_a = edge[k]
        if s_a <= 0.0:
            continue
        env = s_a / epsilon
        t = a
        while True:
            t += exp(1.0 / env)
            if t >= b:
                break
            if uni() * s_a <= s_a * math.exp(-(t - a) / epsilon):
                r_times.append(t)
    return InteractingShotNoisePath(s_path, epsilon, gamma, np.asarray(r_times))


def poisson_integral_fourth_moment(i1: float, i2: float, i3: float, i4: float) -> float:
    """E[(int f dQ)^4] from the power integrals I_k = int f^k dmu.

    The cumulants of a Poisson integral are the I_k; the fourth raw
    moment is I4 + 6 I1^2 I2 + 4 I1 I3 + 3 I2^2 + I1^4.
    """
    return i4 + 6.0 * i1 * i1 * i2 + 4.0 * i1 * i3 + 3.0 * i2 * i2 + i1 ** 4
