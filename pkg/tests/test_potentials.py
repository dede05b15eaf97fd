import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mirrorbias.potentials import (InverseGradError, Potential, bregman, hessian_diag,
                                   inverse_grad, parse_potential, phi_eval, phi_grad,
                                   phi_hess)

BUILTIN = [
    Potential.quadratic(),
    Potential.power(3, 1),
    Potential.power(4, 1),
    Potential.power(2.5, 0.5),
    Potential.power(3, 1, normalized=True),
    Potential.hypentropy(1.0),
    Potential.hypentropy(0.1),
    Potential.quadratic(True),
    Potential.power(4, 1, True),
]
IDS = [str(p) for p in BUILTIN]


# -- worked examples ---------------------------------------------------------

def test_phi_eval_examples():
    assert phi_eval(Potential.hypentropy(1.0), 0.0) == -1.0
    assert phi_eval(Potential.power(4, 1), 1.0) == 2.0
    assert phi_eval(Potential.quadratic(), -3.0) == 9.0


def test_derivative_examples():
    assert phi_hess(Potential.hypentropy(2.0), 0.0) == 0.5
    assert phi_grad(Potential.power(3, 1), -1.0) == -5.0
    assert np.all(phi_hess(Potential.quadratic(), np.linspace(-7, 7, 11)) == 2.0)


def test_bregman_examples():
    assert bregman(Potential.quadratic(), 3.0, 1.0) == 4.0
    for pot in BUILTIN:
        assert bregman(pot, 0.7, 0.7) == 0.0


def test_bregman_hypentropy_high_precision():
    mpmath.mp.dps = 50
    rho = lambda x: x * mpmath.asinh(x) - mpmath.sqrt(x * x + 1)
    drho = lambda x: mpmath.asinh(x)
    exact = rho(mpmath.mpf(1)) - rho(mpmath.mpf(0)) - drho(mpmath.mpf(0)) * 1
    got = bregman(Potential.hypentropy(1.0), 1.0, 0.0)
    assert abs(got - float(exact)) <= 1e-15
    assert abs(got - (math.asinh(1.0) - math.sqrt(2.0) + 1.0)) <= 1e-15
    assert abs(got - 0.467) < 1e-3


def test_inverse_grad_examples():
    assert inverse_grad(Potential.quadratic(), 6.0) == 3.0
    assert abs(inverse_grad(Potential.power(3, 1), 5.0) - 1.0) <= 1e-12
    assert abs(inverse_grad(Potential.hypentropy(1.0), math.asinh(2.0)) - 2.0) <= 1e-12


def test_hessian_diag_examples():
    theta = np.linspace(-1, 1, 13)
    anchor = np.zeros(13)
    assert np.all(hessian_diag(Potential.quadratic(), theta, anchor, 3) == 2.0)
    pot = Potential.power(4, 1, scaled=True)
    assert np.all(hessian_diag(pot, anchor, anchor, 10) == 2.0)
    th = anchor.copy()
    th[4] = 0.1
    H = hessian_diag(pot, th, anchor, 10)
    assert H[4] == pytest.approx(14.0, rel=1e-14)
    assert np.all(np.delete(H, 4) == 2.0)


def test_hessian_diag_length_mismatch():
    with pytest.raises(ValueError):
        hessian_diag(Potential.quadratic(), np.zeros(3), np.zeros(4), 1)


# -- construction and parsing -------------------------------------------------

def test_constructor_validation():
    with pytest.raises(ValueError):
        Potential.power(1.5, 1.0)
    with pytest.raises(ValueError):
        Potential.power(3, -1.0)
    with pytest.raises(ValueError):
        Potential.hypentropy(0.0)


@pytest.mark.parametrize("text", ["quadratic", "scaled:quadratic", "pow:p=3,omega=1",
                                  "scaled:pow:p=4,omega=1", "hypentropy:beta=2",
                                  "scaled:hypentropy:beta=0.5", "pow:p=3,omega=1,normalized=1"])
def test_parse_roundtrip(text):
    pot = parse_potential(text)
    assert parse_potential(str(pot)) == pot


@pytest.mark.parametrize("text", ["cubic", "pow:omega=1", "quadratic:p=2", "hypentropy",
                                  "pow:p=3,omega=x", "hypentropy:beta=-1"])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        parse_potential(text)


def test_quadratic_matches_power_family():
    x = np.linspace(-5, 5, 101)
    q = Potential.quadratic()
    assert np.max(np.abs(phi_eval(Potential.power(2, 0), x) - phi_eval(q, x))) <= 1e-14
    # p = 2, omega = 1 is 2 x**2; normalized it is x**2 again
    assert np.max(np.abs(phi_eval(Potential.power(2, 1), x) / 2 - phi_eval(q, x))) <= 1e-14 * 25
    assert np.max(np.abs(phi_eval(Potential.power(2, 1, normalized=True), x)
                         - phi_eval(q, x))) <= 1e-14 * 25


def test_normalized_power_is_rescaled():
    x = np.linspace(-3, 3, 31)
    a = phi_eval(Potential.power(3, 1), x)
    b = phi_eval(Potential.power(3, 1, normalized=True), x)
    np.testing.assert_allclose(b, a / 2, rtol=1e-15)


# -- properties -----------------------------------------------------------------

@pytest.mark.parametrize("pot", BUILTIN, ids=IDS)
def test_convexity_and_monotone_gradient(pot):
    x = np.sort(np.random.default_rng(0).uniform(-50, 50, 2000))
    assert np.all(phi_hess(pot, x) > 0)
    g = phi_grad(pot, x)
    assert np.all(np.diff(g) > 0)


@pytest.mark.parametrize("pot", BUILTIN, ids=IDS)
def test_bregman_nonnegative(pot):
    r = np.random.default_rng(1)
    x = r.uniform(-5, 5, 1000)
    y = r.uniform(-5, 5, 1000)
    d = bregman(pot, x, y)
    assert np.all(d >= 0)
    assert np.all(d[np.abs(x - y) > 1e-3] > 0)
    assert np.all(bregman(pot, x, x) == 0)


@pytest.mark.parametrize("pot", BUILTIN, ids=IDS)
def test_derivatives_match_finite_differences(pot):
    x = np.random.default_rng(2).uniform(-10, 10, 400)
    x = x[np.abs(x) > 0.05]
    h = 1e-5 * np.maximum(1.0, np.abs(x))
    fd1 = (phi_eval(pot, x + h) - phi_eval(pot, x - h)) / (2 * h)
    fd2 = (phi_grad(pot, x + h) - phi_grad(pot, x - h)) / (2 * h)
    np.testing.assert_allclose(phi_grad(pot, x), fd1, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(phi_hess(pot, x), fd2, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("pot", BUILTIN, ids=IDS)
@given(x=st.floats(-1e3, 1e3))
def test_inverse_grad_roundtrip(pot, x):
    y = phi_grad(pot, x)
    xr = inverse_grad(pot, y)
    assert abs(phi_grad(pot, xr) - y) <= 1e-12 * max(1.0, abs(y))
    assert abs(xr - x) <= 1e-10 * max(1.0, abs(x))


def test_inverse_grad_vectorized():
    pot = Potential.power(4, 1)
    x = np.linspace(-3, 3, 25)
    np.testing.assert_allclose(inverse_grad(pot, phi_grad(pot, x)), x, atol=1e-12)


def test_inverse_grad_failure_is_reported():
    with pytest.raises(InverseGradError):
        inverse_grad(Potential.power(3, 1), float("inf"))


@given(x=st.floats(-1e4, 1e4), y=st.floats(-1e4, 1e4))
def test_quadratic_bregman_is_squared_distance(x, y):
    assert abs(bregman(Potential.quadratic(), x, y) - (x - y) ** 2) <= 1e-14 * max(1.0, (x - y) ** 2)


@given(x=st.floats(-20, 20), c=st.floats(-5, 5))
def test_scaled_hessian_is_rescaled_argument(x, c):
    pot = Potential.power(3, 1, scaled=True)
    n = 7
    H = hessian_diag(pot, np.array([c + x]), np.array([c]), n)
    assert H[0] == pytest.approx(phi_hess(pot, n * ((c + x) - c)), rel=1e-15)
