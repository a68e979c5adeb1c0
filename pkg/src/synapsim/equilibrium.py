"""Invariant-measure functionals of the frozen-weight fast process.

The averaging limit only ever touches the invariant law through integrals
of specified functions, so the law is represented here purely as a
functional evaluator: long-run ergodic averages of exact between-event
occupation integrals, across independent replicas, with across-replica
standard errors.

For the dominating linear model the first and second stationary moments
are available in closed form:

    E[X] = lam w,            E[X^2] = (lam^2 + lam/2) w^2,
    gamma E[Z] = C_k (1 + lam + C_beta (1 + lam w)),
    (gamma+1) E[XZ] = C_k (lam w (1+E[Z]) + (1+lam+C_beta) E[X] + C_beta E[X^2]),

and for the simple model with activation nu + beta0 x the averaged drift
of the weight is the quadratic Lambda2 w^2 + Lambda1 w + Lambda0 with

    Lambda2 = lam beta0^2 B2 (lam/gamma + 1/(2(gamma+1)))
    Lambda1 = lam beta0 (B1/(gamma+1) + (lam B1 + 2 nu B2)/gamma)
    Lambda0 = (nu/gamma)(lam B1 + nu B2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ValidatedModel
from .simulator import (BetaWeighted, PolyFunctional, Trajectory,
                        occupation_functional, occupation_functionals,
                        simulate_fast)
from .util import parallel_map, replica_seeds

FUNCTIONAL_NAMES = (
    "n_p0", "lam_n_p1", "beta_n_p2", "psi_p",
    "n_d0", "lam_n_d1", "beta_n_d2", "psi_d",
    "ex", "ex2", "ez", "exz", "zbeta",
)


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se


@dataclass
class EquilibriumEstimate:
    """Across-replica means and standard errors of the Pi_w functionals."""

    w: float
    functionals: dict[str, Estimate]
    burnin: float
    horizon: float
    replicas: int

    def __getitem__(self, name: str) -> Estimate:
        return self.functionals[name]

    @property
    def psi(self) -> dict[str, Estimate]:
        return {"p": self.functionals["psi_p"], "d": self.functionals["psi_d"]}


def default_windows(model: ValidatedModel) -> tuple[float, float]:
    """(burnin, horizon): 20 relaxation times, then 50x as much again."""
    relax = 1.0 / min(1.0, model.gamma_min, model.spec.alpha)
    burnin = 20.0 * relax
    return burnin, 50.0 * burnin


def _n_functional(model: ValidatedModel, a: str, j: int):
    aff = model.n_affine_on_z(a, j)
    if aff is not None:
        a0, b = aff
        if j == 2:
            return BetaWeighted(a0, b)
        return PolyFunctional(c0=a0, cz=b)
    f = model.spec.n.get(a, j)
    if j == 2:
        return lambda x, z: model.beta(x) * model._eval_on_z(f, z)
    return lambda x, z: model._eval_on_z(f, z)


def drift_coefficients(model: ValidatedModel) -> np.ndarray:
    """Trace weights entering the averaged weight drift <c, z> beta(x)."""
    spec = model.spec
    if spec.weight_update == "jump" and any(spec.w_jump_coeff):
        return np.asarray(spec.w_jump_coeff, dtype=float)
    return np.ones(spec.ell)


def path_functionals(traj: Trajectory, t0: float, t1: float,
                     coeff: np.ndarray | None = None) -> dict[str, float]:
    """Time averages of every tracked functional over [t0, t1] of one path."""
    model = traj.model
    ell = model.spec.ell
    T = t1 - t0
    lam = model.spec.lam
    ones = np.ones(ell)
    if coeff is None:
        coeff = drift_coefficients(model)
    gs = {"ex": PolyFunctional(cx=1.0), "ex2": PolyFunctional(cxx=1.0),
          "ez": PolyFunctional(cz=ones), "exz": PolyFunctional(cxz=ones),
          "zbeta": BetaWeighted(0.0, coeff)}
    for a in "pd":
        for j in range(3):
            gs[f"raw_{a}{j}"] = _n_functional(model, a, j)
    totals = occupation_functionals(traj, gs, t0, t1)
    out: dict[str, float] = {}
    for a in "pd":
        v0, v1, v2 = (totals[f"raw_{a}{j}"] / T for j in range(3))
        out[f"n_{a}0"] = v0
        out[f"lam_n_{a}1"] = lam * v1
        out[f"beta_n_{a}2"] = v2
        out[f"psi_{a}"] = v0 + lam * v1 + v2
    for name in ("ex", "ex2", "ez", "exz", "zbeta"):
        out[name] = totals[name] / T
    return out


def _one_replica(args):
    model, w, horizon, burnin, seed = args
    traj = simulate_fast(w, model, horizon, seed)
    # the frozen fast model zeroes the weight kicks; the drift coefficients
    # must come from the model being averaged
    return path_functionals(traj, burnin, horizon, drift_coefficients(model))


def estimate_pi(w: float, model: ValidatedModel, horizon: float | None = None,
                burnin: float | None = None, replicas: int = 32, seed=0,
                workers: int = 1) -> EquilibriumEstimate:
    """Monte-Carlo Pi_w functionals with across-replica standard errors."""
    if burnin is None or horizon is None:
        b0, h0 = default_windows(model)
        burnin = b0 if burnin is None else burnin
        horizon = h0 if horizon is None else horizon
    if not burnin < horizon:
        raise ValueError("horizon must exceed burn-in")
    seeds = replica_seeds(seed, replicas)
    rows = parallel_map(_one_replica,
                        [(model, w, horizon, burnin, s) for s in seeds],
                        workers=workers)
    funcs = {}
    for name in FUNCTIONAL_NAMES:
        vals = np.array([r[name] for r in rows])
        se = float(vals.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.inf
        funcs[name] = Estimate(float(vals.mean()), se)
    return EquilibriumEstimate(w, funcs, burnin, horizon, replicas)


def cycle_average(traj: Trajectory, g, burnin: float) -> float:
    """Whole-holding-interval average between the first and last post-burnin jumps.

    This is the embedded-chain estimator from the cycle formula: integrals
    over complete holding intervals, normalized by the total holding time.
    """
    times = traj.times
    inside = times[(times >= burnin) & (times <= traj.horizon)]
    if len(inside) < 2:
        raise ValueError("not enough jumps after burn-in for a cycle average")
    t_a, t_b = float(inside[0]), float(inside[-1])
    return occupation_functional(traj, g, t_a, t_b) / (t_b - t_a)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def dominating_moments(w: float, lam: float, C_k: float, C_beta: float,
                       gamma: float) -> tuple[float, float, float, float]:
    """(E[X], E[X^2], E[Z], E[XZ]) under the dominating stationary law."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    ex = lam * w
    ex2 = (lam * lam + lam / 2.0) * w * w
    ez = C_k * (1.0 + lam + C_beta * (1.0 + lam * w)) / gamma
    exz = C_k / (gamma + 1.0) * (lam * w * (1.0 + ez) + (1.0 + lam + C_beta) * ex
                                 + C_beta * ex2)
    return ex, ex2, ez, exz


def dominating_psi(w: float, lam: float, C_k: float, C_beta: float,
                   gamma: float, C_n: float, ell: int) -> float:
    """Closed-form integral of C_n(1+ell z)(1+lam+C_beta(1+x)) under Pi_w."""
    ex, _, ez, exz = dominating_moments(w, lam, C_k, C_beta, gamma)
    base = 1.0 + lam + C_beta
    return C_n * (base + C_beta * ex + ell * base * ez + ell * C_beta * exz)


@dataclass(frozen=True)
class LinearLimitCoefficients:
    """Quadratic averaged drift of the simple model's weight."""

    lambda2: float
    lambda1: float
    lambda0: float
    discriminant: float = field(init=False)
    s1: float | None = field(init=False)
    s2: float | None = field(init=False)

    def __post_init__(self):
        d = self.lambda1 ** 2 - 4.0 * self.lambda2 * self.lambda0
        object.__setattr__(self, "discriminant", d)
        if d > 0 and self.lambda2 > 0:
            r = math.sqrt(d)
            object.__setattr__(self, "s1", (self.lambda1 - r) / (2.0 * self.lambda2))
            object.__setattr__(self, "s2", (self.lambda1 + r) / (2.0 * self.lambda2))
        else:
            object.__setattr__(self, "s1", None)
            object.__setattr__(self, "s2", None)

    @property
    def blowup_available(self) -> bool:
        return self.lambda2 > 0

    def drift(self, w: float) -> float:
        return self.lambda2 * w * w + self.lambda1 * w + self.lambda0


def simple_model_coefficients(lam: float, beta0: float, nu: float, B1: float,
                              B2: float, gamma: float) -> LinearLimitCoefficients:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if min(lam, beta0, nu, B1, B2) < 0:
        raise ValueError("parameters must be non-negative")
    l2 = lam * beta0 ** 2 * B2 * (lam / gamma + 1.0 / (2.0 * (gamma + 1.0)))
    l1 = lam * beta0 * (B1 / (gamma + 1.0) + (lam * B1 + 2.0 * nu * B2) / gamma)
    l0 = nu / gamma * (lam * B1 + nu * B2)
    return LinearLimitCoefficients(l2, l1, l0)
