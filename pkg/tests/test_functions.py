import numpy as np
import pytest
from hypothesis import given, strategies as st

from synapsim.functions import (ArityError, FunctionSpec, affine,
                                affine_clipped, piecewise_linear, saturating)


def test_affine_example():
    f = affine(0.1, 0.5)
    assert f(2.0) == pytest.approx(1.1, abs=1e-15)


def test_affine_clipped_below_cutoff():
    f = affine_clipped(1.0, 1.0)  # zero at and below -1
    assert f(-2.0) == 0.0
    assert f(-1.0) == 0.0
    assert f(0.5) == pytest.approx(1.5)
    assert f.clip_cutoff() == pytest.approx(-1.0)


def test_saturating_example():
    f = saturating(3.0)
    assert f(1.0) == pytest.approx(1.5)


def test_piecewise_linear_interpolation_and_extension():
    f = piecewise_linear([0.0, 1.0, 2.0], [0.0, 2.0, 2.0])
    assert f(0.5) == pytest.approx(1.0)
    assert f(1.5) == pytest.approx(2.0)
    assert f(3.0) == pytest.approx(2.0)   # flat right extension
    assert f(-1.0) == pytest.approx(-2.0)  # left extension with first slope


def test_vector_reduction_and_arity():
    f = affine(0.0, 1.0, weights=(1.0, 2.0))
    assert f(np.array([1.0, 2.0])) == pytest.approx(5.0)
    with pytest.raises(ArityError):
        f(np.array([1.0, 2.0, 3.0]))
    g = affine(0.0, 1.0)
    with pytest.raises(ArityError):
        g(np.array([1.0, 2.0]))


def test_bad_specs_rejected():
    with pytest.raises(ValueError):
        FunctionSpec("mystery", (1.0,))
    with pytest.raises(ValueError):
        FunctionSpec("affine", (1.0,))
    with pytest.raises(ValueError):
        piecewise_linear([0.0, 0.0], [1.0, 2.0])


@given(st.floats(-50, 50), st.floats(-5, 5), st.floats(-100, 100))
def test_clipped_is_nonnegative_and_matches_affine_above_cut(a, b, u):
    f = affine_clipped(a, b)
    v = f(u)
    assert v >= 0.0
    assert v == max(0.0, a + b * u)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-100, 100),
       st.floats(-100, 100))
def test_affine_is_affine(a, b, u, v):
    f = affine(a, b)
    lhs = f(0.5 * (u + v))
    assert lhs == pytest.approx(0.5 * (f(u) + f(v)), rel=1e-12, abs=1e-9)


def test_monotonicity_queries():
    assert affine(1.0, 2.0).is_nondecreasing()
    assert not affine(1.0, -2.0).is_nondecreasing()
    assert saturating(1.0).is_nondecreasing()
    assert piecewise_linear([0, 1, 2], [0, 1, 1]).is_nondecreasing()
    assert not piecewise_linear([0, 1, 2], [0, 1, 0]).is_nondecreasing()
