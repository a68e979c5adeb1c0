"""Closed enumeration of scalar rule shapes used throughout the model.

Every state-dependent coefficient of the jump system (activation rate,
potential drop, trace increments, integrator inflows, weight drift terms)
is one of a small set of shapes so that model files stay serializable and
the assumption checks stay decidable:

    constant          f(u) = c
    affine            f(u) = a + b*u
    affine_clipped    f(u) = max(0, a + b*u)
    saturating        f(u) = c*u / (1 + u)
    piecewise_linear  linear interpolation through (xs, ys) knots,
                      extended with the end slopes outside the knot range

A spec with vector input reduces it to a scalar through a declared
non-negative weight vector before applying the scalar rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

KINDS = ("constant", "affine", "affine_clipped", "saturating", "piecewise_linear")


class ArityError(ValueError):
    """Input dimension does not match the spec's declared arity."""


@dataclass(frozen=True)
class FunctionSpec:
    """One scalar rule, optionally preceded by a linear reduction.

    ``coeffs`` is interpreted per kind: ``(c,)`` for constant and
    saturating, ``(a, b)`` for the affine kinds, and the knot abscissae
    followed by the knot ordinates for piecewise_linear (an even-length
    tuple split in half).  ``weights``, when given, declares the input
    arity to be ``len(weights)`` and the reduction u = <weights, z>.
    """

    kind: str
    coeffs: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        n = len(self.coeffs)
        if self.kind in ("constant", "saturating") and n != 1:
            raise ValueError(f"{self.kind} takes one coefficient, got {n}")
        if self.kind in ("affine", "affine_clipped") and n != 2:
            raise ValueError(f"{self.kind} takes two coefficients, got {n}")
        if self.kind == "piecewise_linear":
            if n < 4 or n % 2:
                raise ValueError("piecewise_linear takes knots as xs+ys, at least two knots")
            xs = self.coeffs[: n // 2]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("piecewise_linear knot abscissae must be increasing")

    @property
    def arity(self) -> int:
        return 1 if self.weights is None else len(self.weights)

    def reduce_input(self, u) -> float:
        """Collapse a vector argument to the scalar the rule acts on."""
        u = np.asarray(u, dtype=float)
        if self.weights is None:
            if u.ndim == 0:
                return float(u)
            if u.size == 1:
                return float(u.reshape(()))
            raise ArityError(f"scalar rule got input of size {u.size}")
        w = np.asarray(self.weights)
        if u.ndim == 0 and w.size == 1:
            return float(w[0] * u)
        if u.shape != w.shape:
            raise ArityError(f"expected input of shape {w.shape}, got {u.shape}")
        return float(w @ u)

    def scalar(self, u: float) -> float:
        """Apply the rule to an already-reduced scalar."""
        c = self.coeffs
        if self.kind == "constant":
            return c[0]
        if self.kind == "affine":
            return c[0] + c[1] * u
        if self.kind == "affine_clipped":
            return max(0.0, c[0] + c[1] * u)
        if self.kind == "saturating":
            return c[0] * u / (1.0 + u)
        xs = np.array(c[: len(c) // 2])
        ys = np.array(c[len(c) // 2 :])
        if u <= xs[0]:
            s = (ys[1] - ys[0]) / (xs[1] - xs[0])
            return float(ys[0] + s * (u - xs[0]))
        if u >= xs[-1]:
            s = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
            return float(ys[-1] + s * (u - xs[-1]))
        return float(np.interp(u, xs, ys))

    def __call__(self, u) -> float:
        return self.scalar(self.reduce_input(u))

    # -- structure queries used by the validator and the exact integrators --

    def as_affine(self) -> tuple[float, float] | None:
        """(a, b) with f(u) = a + b*u, or None if not globally affine."""
        if self.kind == "constant":
            return (self.coeffs[0], 0.0)
        if self.kind == "affine":
            return self.coeffs
        return None

    def clip_cutoff(self) -> float | None:
        """Input below which an affine_clipped rule is identically zero."""
        if self.kind != "affine_clipped":
            return None
        a, b = self.coeffs
        if b > 0:
            return -a / b
        return None if a > 0 else np.inf

    def is_nondecreasing(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind in ("affine", "affine_clipped"):
            return self.coeffs[1] >= 0
        if self.kind == "saturating":
            return self.coeffs[0] >= 0
        ys = self.coeffs[len(self.coeffs) // 2 :]
        return all(b >= a for a, b in zip(ys, ys[1:]))


def constant(c: float) -> FunctionSpec:
    return FunctionSpec("constant", (c,))


def affine(a: float, b: float, weights: Sequence[float] | None = None) -> FunctionSpec:
    return FunctionSpec("affine", (a, b), None if weights is None else tuple(weights))


def affine_clipped(a: float, b: float, weights: Sequence[float] | None = None) -> FunctionSpec:
    return FunctionSpec("affine_clipped", (a, b), None if weights is None else tuple(weights))


def saturating(c: float) -> FunctionSpec:
    return FunctionSpec("saturating", (c,))


def piecewise_linear(xs: Sequence[float], ys: Sequence[float]) -> FunctionSpec:
    return FunctionSpec("piecewise_linear", tuple(xs) + tuple(ys))


ZERO = constant(0.0)
