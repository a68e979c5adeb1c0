"""Model specification, assumption checking, and the validated handle.

A model instance collects every coefficient of the jump system

    dX  = -X dt            + W dN_pre - g(X-) dN_post
    dZ  = (-gamma.Z + k0)dt + k1(Z-) dN_pre + k2(Z-) dN_post
    dOm_a = (-alpha Om_a + n_a0(Z)) dt + n_a1(Z-) dN_pre + n_a2(Z-) dN_post
    dW  = M(Om_p, Om_d, W) dt          (weight_update = "drift")
    dW  = <c, Z-> dN_post              (weight_update = "jump")

where N_pre is Poisson(lambda) and N_post fires at rate beta(X(t-)).
``validate_spec`` checks the standing assumptions (positivity of decay
rates, linear growth of beta, boundedness of the k's, linear growth of
the n's, the M decomposition) analytically where the rule shape permits
and on a dense probe grid otherwise.  A ``ValidatedModel`` is immutable
and safe to share across simulation workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import FunctionSpec, constant

GRID_STEP = 1e-2
GRID_LO = -10.0
GRID_HI = 1e3
_TOL = 1e-9


@dataclass(frozen=True)
class Bounds:
    """User-supplied constants of the growth/boundedness assumptions."""

    c_beta: float = 0.0
    C_beta: float = 0.0
    c_g: float = 0.0
    C_k: float = 0.0
    C_n: float = 0.0
    C_M: float = 0.0

    def __post_init__(self):
        for name in ("c_beta", "C_beta", "c_g", "C_k", "C_n", "C_M"):
            if getattr(self, name) < 0:
                raise ValueError(f"bound {name} must be non-negative")


@dataclass(frozen=True)
class NSpecs:
    """Integrator inflow rules n_{a,j}, a in {p,d}, j in {0: drift, 1: pre, 2: post}."""

    p0: FunctionSpec
    p1: FunctionSpec
    p2: FunctionSpec
    d0: FunctionSpec
    d1: FunctionSpec
    d2: FunctionSpec

    def get(self, a: str, j: int) -> FunctionSpec:
        return getattr(self, f"{a}{j}")

    @classmethod
    def zeros(cls) -> "NSpecs":
        z = constant(0.0)
        return cls(z, z, z, z, z, z)


@dataclass(frozen=True)
class ModelSpec:
    lam: float
    ell: int
    gamma: tuple[float, ...]
    k0: tuple[float, ...]
    k1: tuple[FunctionSpec, ...]
    k2: tuple[FunctionSpec, ...]
    beta: FunctionSpec
    g: FunctionSpec
    n: NSpecs
    alpha: float
    m_p: FunctionSpec
    m_d: FunctionSpec
    delta: float
    bounds: Bounds
    kw: tuple[float, float] = (-math.inf, math.inf)
    weight_update: str = "drift"
    w_jump_coeff: tuple[float, ...] | None = None
    name: str = "model"

    def __post_init__(self):
        if self.weight_update not in ("drift", "jump"):
            raise ValueError("weight_update must be 'drift' or 'jump'")
        if self.weight_update == "jump" and self.w_jump_coeff is None:
            object.__setattr__(self, "w_jump_coeff", (1.0,) * self.ell)


@dataclass
class SystemState:
    """Full state (X, Z, Omega_p, Omega_d, W) at a time point."""

    x: float
    z: np.ndarray
    omega_p: float
    omega_d: float
    w: float
    t: float = 0.0

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))

    def copy(self) -> "SystemState":
        return SystemState(self.x, self.z.copy(), self.omega_p, self.omega_d, self.w, self.t)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.x], self.z, [self.omega_p, self.omega_d, self.w]))


@dataclass(frozen=True)
class Violation:
    assumption: str
    message: str
    probe: float | None = None

    def __str__(self):
        at = "" if self.probe is None else f" (at probe {self.probe:g})"
        return f"{self.assumption}: {self.message}{at}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Violation, ...]
    checks: tuple[str, ...]
    grid: tuple[float, float, float] = (GRID_LO, GRID_HI, GRID_STEP)

    @property
    def ok(self) -> bool:
        return not self.issues


class InvalidModelError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        lines = "\n  ".join(str(v) for v in report.issues)
        super().__init__(f"model violates assumptions:\n  {lines}")


def _batch(f: FunctionSpec, u: np.ndarray) -> np.ndarray:
    """Vectorized evaluation of the scalar rule on a probe grid."""
    c = f.coeffs
    if f.kind == "constant":
        return np.full_like(u, c[0])
    if f.kind == "affine":
        return c[0] + c[1] * u
    if f.kind == "affine_clipped":
        return np.maximum(0.0, c[0] + c[1] * u)
    if f.kind == "saturating":
        return c[0] * u / (1.0 + u)
    half = len(c) // 2
    xs, ys = np.array(c[:half]), np.array(c[half:])
    out = np.interp(u, xs, ys)
    lo, hi = u < xs[0], u > xs[-1]
    out[lo] = ys[0] + (ys[1] - ys[0]) / (xs[1] - xs[0]) * (u[lo] - xs[0])
    out[hi] = ys[-1] + (ys[-1] - ys[-2]) / (xs[-1] - xs[-2]) * (u[hi] - xs[-1])
    return out


def _x_grid() -> np.ndarray:
    return np.arange(GRID_LO, GRID_HI + GRID_STEP / 2, GRID_STEP)


def _u_grid() -> np.ndarray:
    return np.arange(0.0, GRID_HI + GRID_STEP / 2, GRID_STEP)


def _worst(grid, bad_mask) -> float | None:
    idx = np.flatnonzero(bad_mask)
    return None if idx.size == 0 else float(grid[idx[0]])


def validate_spec(spec: ModelSpec) -> ValidationReport:
    """Check every standing assumption; report all violations found.

    Pure and idempotent: no state is mutated, and the report depends only
    on the spec.  Use :func:`validated` to obtain the simulation handle.
    """
    issues: list[Violation] = []
    checks: list[str] = []
    b = spec.bounds

    def check(name: str, ok: bool, message: str, probe: float | None = None):
        checks.append(name)
        if not ok:
            issues.append(Violation(name, message, probe))

    # lambda = 0 is admitted for degenerate/diagnostic configurations; the
    # ergodicity assumptions themselves need lambda > 0
    check("lambda", spec.lam >= 0, "pre-synaptic rate lambda must be non-negative")
    check("ell", spec.ell >= 1 and len(spec.gamma) == spec.ell, "gamma must have ell positive entries")
    bad_g = [i for i, gi in enumerate(spec.gamma) if gi <= 0]
    check("gamma", not bad_g, "gamma must be positive", float(bad_g[0]) if bad_g else None)
    check("alpha", spec.alpha > 0, "integrator decay alpha must be positive")
    check("delta", spec.delta >= 0, "weight decay delta must be non-negative")
    check("kw", spec.kw[0] < spec.kw[1], "weight interval K_W must be non-empty")

    xg = _x_grid()
    ug = _u_grid()

    # beta: non-negative, zero at and below -c_beta, growth <= C_beta(1+|x|)
    if spec.beta.kind == "saturating":
        check("beta.domain", False, "saturating rule is not defined on the whole real line")
    else:
        bx = _batch(spec.beta, xg)
        check("beta.nonneg", bool(np.all(bx >= -_TOL)), "beta must be non-negative",
              _worst(xg, bx < -_TOL))
        left = xg <= -b.c_beta + _TOL
        check("beta.cutoff", bool(np.all(np.abs(bx[left]) <= _TOL)),
              f"beta must vanish for x <= -c_beta = {-b.c_beta:g}",
              _worst(xg, left & (np.abs(bx) > _TOL)))
        # left tail beyond the grid
        if spec.beta.kind == "constant":
            tail_ok = spec.beta.coeffs[0] == 0.0
        elif spec.beta.kind == "affine":
            tail_ok = spec.beta.coeffs == (0.0, 0.0)
        elif spec.beta.kind == "affine_clipped":
            cut = spec.beta.clip_cutoff()
            tail_ok = cut is not None and cut >= -b.c_beta
        else:
            half = len(spec.beta.coeffs) // 2
            xs, ys = spec.beta.coeffs[:half], spec.beta.coeffs[half:]
            tail_ok = ys[0] == 0.0 and ys[1] == ys[0] if xs[0] > GRID_LO else True
            tail_ok = tail_ok or all(y == 0 for y in ys)
            # grid already covers [-10, -c_beta]; only the extension slope matters
            tail_ok = (ys[1] - ys[0]) == 0.0 and ys[0] == 0.0 or xs[0] <= -b.c_beta and ys[0] == 0.0 and ys[1] >= ys[0]
        check("beta.tail", bool(tail_ok), "beta must vanish on the left tail (x -> -inf)")
        growth = b.C_beta * (1.0 + np.abs(xg))
        check("beta.growth", bool(np.all(bx <= growth + _TOL)),
              "beta must satisfy beta(x) <= C_beta(1+|x|)", _worst(xg, bx > growth + _TOL))
        if spec.beta.kind in ("affine", "affine_clipped"):
            a, bb = spec.beta.coeffs
            check("beta.growth_analytic", max(a, bb) <= b.C_beta + _TOL,
                  "affine beta needs max(intercept, slope) <= C_beta")

    # g: continuous with 0 <= g(x) <= max(c_g, x)
    if spec.g.kind == "saturating":
        check("g.domain", False, "saturating rule is not defined on the whole real line")
    else:
        gx = _batch(spec.g, xg)
        check("g.nonneg", bool(np.all(gx >= -_TOL)), "g must be non-negative", _worst(xg, gx < -_TOL))
        cap = np.maximum(b.c_g, xg)
        check("g.cap", bool(np.all(gx <= cap + _TOL)),
              "g must satisfy 0 <= g(x) <= max(c_g, x)", _worst(xg, gx > cap + _TOL))

    # k0 and the componentwise trace increments
    k0a = np.asarray(spec.k0, dtype=float)
    check("k0", bool(len(spec.k0) == spec.ell and np.all(k0a >= 0) and np.all(k0a <= b.C_k + _TOL)),
          "k0 must lie in [0, C_k] componentwise")
    for tag, fam in (("k1", spec.k1), ("k2", spec.k2)):
        check(f"{tag}.shape", len(fam) == spec.ell, f"{tag} must have ell components")
        for i, f in enumerate(fam[: spec.ell]):
            fv = _batch(f, ug)
            check(f"{tag}[{i}].nonneg", bool(np.all(fv >= -_TOL)),
                  f"{tag} component {i} must be non-negative", _worst(ug, fv < -_TOL))
            check(f"{tag}[{i}].bounded", bool(np.all(fv <= b.C_k + _TOL)),
                  f"{tag} component {i} must be bounded by C_k", _worst(ug, fv > b.C_k + _TOL))

    # n_{a,j}: non-negative with n(z) <= C_n(1 + ||z||)
    for a in "pd":
        for j in range(3):
            f = spec.n.get(a, j)
            fv = _batch(f, ug)
            name = f"n.{a}{j}"
            check(f"{name}.nonneg", bool(np.all(fv >= -_TOL)),
                  f"n_{a}{j} must be non-negative", _worst(ug, fv < -_TOL))
            # conservative reduction: u = <wt, z> <= max(wt) ||z||
            wmax = 1.0 if f.weights is None else max(list(f.weights) + [0.0])
            bound = b.C_n * (1.0 + (ug / wmax if wmax > 0 else 0.0))
            check(f"{name}.growth", bool(np.all(fv <= bound + _TOL)),
                  f"n_{a}{j} must satisfy n(z) <= C_n(1+||z||)", _worst(ug, fv > bound + _TOL))

    # M decomposition: M = M_p - M_d - delta w
    if spec.weight_update == "drift":
        for tag, f in (("m_p", spec.m_p), ("m_d", spec.m_d)):
            fv = _batch(f, ug)
            check(f"{tag}.nonneg", bool(np.all(fv >= -_TOL)), f"{tag} must be non-negative",
                  _worst(ug, fv < -_TOL))
            check(f"{tag}.monotone", f.is_nondecreasing() and bool(np.all(np.diff(fv) >= -_TOL)),
                  f"{tag} must be non-decreasing in omega")
            bound = b.C_M * (1.0 + ug)
            check(f"{tag}.growth", bool(np.all(fv <= bound + _TOL)),
                  f"{tag} must satisfy M_a(omega) <= C_M(1+omega)", _worst(ug, fv > bound + _TOL))
    else:
        cj = spec.w_jump_coeff or ()
        check("w_jump_coeff", len(cj) == spec.ell and all(c >= 0 for c in cj),
              "jump-mode weight coefficients must be ell non-negative reals")

    return ValidationReport(tuple(issues), tuple(checks))


@dataclass(frozen=True)
class ValidatedModel:
    """Immutable handle produced by a successful validation.

    Carries the spec plus the derived constants the simulator needs:
    the slowest trace decay ``gamma_min``, the lower edge of the
    potential state space ``-c0``, and the fixed points ``kbar = k0/gamma``
    of the trace flow.
    """

    spec: ModelSpec
    gamma: np.ndarray = field(repr=False, default=None)
    k0: np.ndarray = field(repr=False, default=None)
    kbar: np.ndarray = field(repr=False, default=None)
    gamma_min: float = 0.0
    c0: float = 0.0

    def __post_init__(self):
        s = self.spec
        object.__setattr__(self, "gamma", np.asarray(s.gamma, dtype=float))
        object.__setattr__(self, "k0", np.asarray(s.k0, dtype=float))
        object.__setattr__(self, "kbar", self.k0 / self.gamma)
        object.__setattr__(self, "gamma_min", float(np.min(self.gamma)))
        object.__setattr__(self, "c0", s.bounds.c_beta + s.bounds.c_g)
        # hot-path caches: constant trace increments, affine integrator inflows
        for tag, fam in (("_k1_const", s.k1), ("_k2_const", s.k2)):
            const = (np.array([f.coeffs[0] for f in fam])
                     if all(f.kind == "constant" for f in fam) else None)
            object.__setattr__(self, tag, const)
        object.__setattr__(self, "_n_aff",
                           {(a, j): self._compute_n_affine(a, j)
                            for a in "pd" for j in range(3)})

    # -- pointwise evaluation -------------------------------------------------
    def beta(self, x: float) -> float:
        return self.spec.beta.scalar(x)

    def g(self, x: float) -> float:
        return self.spec.g.scalar(x)

    def _eval_on_z(self, f: FunctionSpec, z: np.ndarray) -> float:
        if f.kind == "constant":
            return f.coeffs[0]
        if f.weights is not None:
            return f.scalar(float(np.dot(f.weights, z)))
        if self.spec.ell == 1:
            return f.scalar(float(z[0]))
        raise ValueError("vector-input rule needs declared reduction weights")

    def k1_vec(self, z: np.ndarray) -> np.ndarray:
        if self._k1_const is not None:
            return self._k1_const
        return np.array([self._eval_on_z(f, z) for f in self.spec.k1])

    def k2_vec(self, z: np.ndarray) -> np.ndarray:
        if self._k2_const is not None:
            return self._k2_const
        return np.array([self._eval_on_z(f, z) for f in self.spec.k2])

    def n_eval(self, a: str, j: int, z: np.ndarray) -> float:
        aff = self._n_aff[(a, j)]
        if aff is not None:
            return aff[0] + float(np.dot(aff[1], z))
        return self._eval_on_z(self.spec.n.get(a, j), z)

    def m_drift(self, omega_p: float, omega_d: float, w: float) -> float:
        s = self.spec
        return s.m_p.scalar(omega_p) - s.m_d.scalar(omega_d) - s.delta * w

    def w_jump(self, z: np.ndarray) -> float:
        return float(np.dot(self.spec.w_jump_coeff, z))

    def post_envelope(self, x: float) -> float:
        """Bound on beta along the flow from x: |X| decays between jumps."""
        return self.spec.bounds.C_beta * (1.0 + abs(x))

    def n_affine_on_z(self, a: str, j: int) -> tuple[float, np.ndarray] | None:
        """(a0, b) with n(z) = a0 + <b, z>, or None if the rule is not affine."""
        return self._n_aff[(a, j)]

    def _compute_n_affine(self, a: str, j: int) -> tuple[float, np.ndarray] | None:
        f = self.spec.n.get(a, j)
        ab = f.as_affine()
        if ab is None and f.kind == "affine_clipped":
            # non-negative coefficients never clip on z >= 0
            a0, b1 = f.coeffs
            ab = (a0, b1) if a0 >= 0 and b1 >= 0 else None
        if ab is None:
            return None
        a0, b1 = ab
        if f.weights is not None:
            return a0, b1 * np.asarray(f.weights)
        if self.spec.ell == 1:
            return a0, np.array([b1])
        return (a0, np.zeros(self.spec.ell)) if b1 == 0.0 else None


def validated(spec: ModelSpec) -> ValidatedModel:
    """Validate and wrap, raising InvalidModelError on any violation."""
    report = validate_spec(spec)
    if not report.ok:
        raise InvalidModelError(report)
    return ValidatedModel(spec)
