import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burgers_blowup.profiles import (EigenfunctionSpec, OperatorContext, Profile, a_field_speed,
                                     eigen_residual, fuss_catalan_coefficients, growth_envelope,
                                     hx_apply, large_x_asymptotic, log_grid, phi_all, phi_envelope,
                                     profile_all, profile_derivs, profile_eval, profile_sum_terms,
                                     residual_selfsimilar, series_coefficients, small_x_series)

finite_x = st.floats(min_value=-1e8, max_value=1e8, allow_nan=False, allow_infinity=False)
index = st.integers(min_value=1, max_value=5)


def test_known_point_and_derivatives():
    p = Profile(1)
    psi, d1, d2 = profile_all(p, 2.0)
    assert psi == pytest.approx(-1.0, abs=1e-15)
    assert d1 == pytest.approx(-0.25, abs=1e-15)
    assert d2 == pytest.approx(3.0 / 32.0, abs=1e-15)
    assert isinstance(psi, float)


def test_origin_values():
    for i in range(1, 5):
        psi, d1, d2 = profile_all(Profile(i), 0.0)
        assert (psi, d1, d2) == (0.0, -1.0, 0.0)


def test_invalid_index_rejected():
    with pytest.raises(ValueError):
        Profile(0)
    with pytest.raises(ValueError):
        Profile(-2)


def test_nonfinite_argument_rejected():
    with pytest.raises(ValueError):
        profile_eval(Profile(1), np.array([1.0, np.inf]))


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_ode_residual_on_nine_decades(i):
    X = log_grid(1e-3, 1e6, 2000, symmetric=True)
    assert residual_selfsimilar(Profile(i), X) < 1e-10


def test_residual_empty_grid():
    assert residual_selfsimilar(Profile(1), []) == 0.0


@settings(max_examples=200, deadline=None)
@given(i=index, x=finite_x)
def test_implicit_relation_holds(i, x):
    psi = profile_eval(Profile(i), x)
    n = 2 * i + 1
    assert abs(-psi - psi**n - x) <= 8 * np.finfo(float).eps * max(abs(x), abs(psi), 1e-300)


@settings(max_examples=200, deadline=None)
@given(i=index, x=finite_x)
def test_oddness(i, x):
    p = Profile(i)
    assert profile_eval(p, -x) == -profile_eval(p, x)


@settings(max_examples=200, deadline=None)
@given(i=index, a=finite_x, b=finite_x)
def test_monotone_decreasing(i, a, b):
    p = Profile(i)
    lo, hi = min(a, b), max(a, b)
    assert profile_eval(p, lo) >= profile_eval(p, hi)
    d1, _ = profile_derivs(p, np.array([lo, hi]))
    assert np.all(d1 < 0) and np.all(d1 >= -1.0)


def test_series_matches_fuss_catalan():
    for i in range(1, 5):
        assert series_coefficients(i, 8) == fuss_catalan_coefficients(i, 8)
    assert series_coefficients(1, 4) == [Fraction(-1), Fraction(1), Fraction(-3), Fraction(12)]


def test_small_x_series_order():
    p = Profile(1)
    X = np.array([1e-2, 2e-2, 4e-2])
    err = np.abs(profile_eval(p, X) - small_x_series(p, X))
    # next term is -3 X^5
    assert np.allclose(err / X**5, 3.0, rtol=0.05)


def test_large_x_asymptotic():
    p = Profile(2)
    X = np.array([1e4, 1e6, 1e8])
    rel = np.abs(profile_eval(p, X) / large_x_asymptotic(p, X) - 1.0)
    assert np.all(np.diff(rel) < 0) and rel[-1] < 1e-6
    env = growth_envelope(p, X)
    assert np.all(np.abs(profile_eval(p, X)) / env < 2.0)


@pytest.mark.parametrize("i1", [1, 2, 3])
@pytest.mark.parametrize("j", range(7))
def test_eigenfunctions(i1, j):
    X = log_grid(1e-3, 1e6, 1500, symmetric=True)
    e = EigenfunctionSpec(j, i1)
    assert eigen_residual(e, X) <= 1e-8
    assert e.lambda_exact == Fraction(j - 2 * i1 - 1, 2 * i1)


def test_ground_state_eigenvalue():
    e = EigenfunctionSpec(0, 2)
    assert e.lambda_j == -Profile(2).alpha


def test_halved_denominator_is_not_an_eigenvalue():
    # the alternative (j - 2 i1 - 1)/2 fails the pointwise check for i1 > 1
    X = log_grid(1e-3, 1e3, 400, symmetric=True)
    e = EigenfunctionSpec(1, 2)
    phi, dphi = phi_all(e, X)
    res = hx_apply(phi, dphi, X, 2) - (1 - 5) / 2 * phi
    assert np.max(np.abs(res)) / np.max(np.abs(phi)) > 1e-2


def test_phi_envelope_bounds_ratio():
    e = EigenfunctionSpec(4, 1)
    X = log_grid(1e-2, 1e8, 200)
    ratio = np.abs(phi_all(e, X)[0]) / phi_envelope(e, X)
    assert ratio.max() / ratio.min() < 50


def test_single_bump_speed():
    ctx = OperatorContext(s=3.0, centers=(0.0,), profiles=(1,))
    X = np.array([0.5, 2.0, 10.0])
    assert np.allclose(a_field_speed(ctx, X), 1.5 * X + profile_eval(Profile(1), X), rtol=1e-15)
    terms = profile_sum_terms(ctx, X)
    assert np.all(terms["cross"] == 0.0)


def test_context_validation():
    with pytest.raises(ValueError):
        OperatorContext(s=0.0, centers=(1.0,), profiles=(1,))
    with pytest.raises(ValueError):
        OperatorContext(s=0.0, centers=(0.0, 1.0), profiles=(1,))


def test_two_bump_cross_terms():
    ctx = OperatorContext(s=9.0, centers=(0.0, 30.0), profiles=(1, 2))
    X = np.array([5.0, 25.0])
    t = profile_sum_terms(ctx, X)
    vals = [a_field_speed(OperatorContext(9.0, (0.0,), (1,)), X) - 1.5 * X]
    scale = math.exp((Profile(2).alpha - 1.5) * 9.0)
    psi2, d2, _ = profile_all(Profile(2), scale * (X - 30.0))
    expected = vals[0] * d2 + psi2 / scale * profile_derivs(Profile(1), X)[0]
    assert np.allclose(t["cross"], expected, rtol=1e-13)
