from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wallcoherence.core import CONST, DomainError
from wallcoherence.decoherence.specfun import (
    bose_einstein,
    conductivity_dielectric,
    drude_dielectric,
    exponential_integral_e1,
    fresnel_coefficients,
    principal_sqrt,
    thermal_factor,
)

mpmath.mp.dps = 40


def e1_oracle(x: float) -> float:
    """E1 by direct quadrature of exp(-t)/t, independent of mpmath.e1."""
    return float(mpmath.quad(lambda t: mpmath.exp(-t) / t, [x, x + 1, x + 10, mpmath.inf]))


@pytest.mark.parametrize("x", np.geomspace(1e-3, 30, 41))
def test_e1_matches_quadrature_oracle(x):
    assert exponential_integral_e1(x) == pytest.approx(e1_oracle(x), rel=1e-8)


@given(st.floats(1e-3, 30.0))
def test_e1_matches_library_oracle(x):
    assert exponential_integral_e1(x) == pytest.approx(float(mpmath.e1(x)), rel=1e-8)


def test_e1_limits():
    assert exponential_integral_e1(800.0) == 0.0
    # E1(x) ~ -gamma - ln x for small x
    assert exponential_integral_e1(1e-12) == pytest.approx(-0.5772156649015329 - math.log(1e-12), rel=1e-12)
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            exponential_integral_e1(bad)


def test_bose_einstein_at_kt():
    T = 300.0
    w = CONST.boltzmann * T / CONST.hbar
    assert bose_einstein(w, T) == pytest.approx(1 / (math.e - 1), rel=1e-12)
    assert bose_einstein(w, T) == pytest.approx(0.58198, abs=5e-6)


def test_bose_einstein_overflow_safe():
    assert bose_einstein(1e20, 1.0) == 0.0
    with pytest.raises(DomainError):
        bose_einstein(1e12, 0.0)
    with pytest.raises(DomainError):
        bose_einstein(0.0, 300.0)


@given(st.floats(1e6, 1e15), st.floats(1.0, 1000.0))
def test_coth_identity(w, T):
    n = bose_einstein(w, T)
    coth = thermal_factor(w, T)
    assert 2 * n + 1 == pytest.approx(coth, rel=1e-12)


def test_thermal_factor_zero_temperature():
    assert thermal_factor(1e12, 0.0) == 1.0
    assert thermal_factor(1e12, 300.0) > 1.0


def test_principal_sqrt_branch():
    assert principal_sqrt(4.0) == 2.0
    assert principal_sqrt(-4.0) == 2j
    assert principal_sqrt(complex(-4.0, -0.0)) == 2j
    z = principal_sqrt(np.array([-1 - 1e-9j, 3 + 4j]))
    assert np.all(z.real >= 0)


def test_drude_lossless_limit():
    assert drude_dielectric(2.0, 1.0, 0.0) == pytest.approx(1 - 1 / 4)
    with pytest.raises(DomainError):
        drude_dielectric(0.0, 1.0, 1.0)


@given(st.floats(1e6, 1e16), st.floats(1e6, 1e16), st.floats(1e3, 1e16))
def test_drude_passive(w, wp, gamma):
    eps = drude_dielectric(w, wp, gamma)
    assert eps.imag > 0
    assert eps.imag == pytest.approx(wp**2 * gamma / (w * (w * w + gamma * gamma)), rel=1e-9)


def test_conductivity_dielectric():
    eps = conductivity_dielectric(1e12, 1.0)
    assert eps.real == 1.0
    assert eps.imag == pytest.approx(1.0 / (CONST.vacuum_permittivity * 1e12))


# ---------------------------------------------------------------- Fresnel


def fresnel_oracle(k: float, w: float, eps: complex) -> tuple[complex, complex]:
    """Textbook form with normal wave numbers k_z = sqrt(eps w^2/c^2 - k^2), Im k_z >= 0."""
    c = mpmath.mpf(CONST.light_speed)
    k, w = mpmath.mpf(k), mpmath.mpf(w)
    e = mpmath.mpc(eps.real, eps.imag)

    def kz(medium):
        r = mpmath.sqrt(medium * (w / c) ** 2 - k * k)
        if mpmath.im(r) < 0 or (mpmath.im(r) == 0 and mpmath.re(r) < 0):
            r = -r
        return r

    k1, k2 = kz(1), kz(e)
    rs = (k1 - k2) / (k1 + k2)
    rp = (e * k1 - k2) / (e * k1 + k2)
    return complex(rs), complex(rp)


def test_fresnel_no_interface():
    rs, rp = fresnel_coefficients(1e6, 1e12, 1.0 + 0j)
    assert rs == 0 and rp == 0


def test_fresnel_perfect_conductor_limit():
    _, rp = fresnel_coefficients(1e6, 1e12, 1e14j)
    assert abs(rp - 1) < 1e-6


def test_fresnel_textbook_point():
    w = 1e15
    k = 2 * w / CONST.light_speed
    rs, rp = fresnel_coefficients(k, w, 2.0 + 0j)
    os_, op = fresnel_oracle(k, w, 2.0 + 0j)
    assert abs(rs - os_) < 1e-12 and abs(rp - op) < 1e-12
    # closed form: lambda = sqrt(3) w/c, kappa = sqrt(2) w/c
    assert rs == pytest.approx((math.sqrt(3) - math.sqrt(2)) / (math.sqrt(3) + math.sqrt(2)), rel=1e-12)


def test_fresnel_random_against_oracle():
    rng = np.random.default_rng(20240611)
    for _ in range(100):
        w = 10 ** rng.uniform(9, 16)
        k = (w / CONST.light_speed) * 10 ** rng.uniform(0.001, 6)  # evanescent in vacuum
        eps = complex(rng.uniform(-1e4, 1e4), 10 ** rng.uniform(-3, 8))
        rs, rp = fresnel_coefficients(k, w, eps)
        os_, op = fresnel_oracle(k, w, eps)
        assert abs(rs - os_) <= 1e-10 * max(1.0, abs(os_))
        assert abs(rp - op) <= 1e-10 * max(1.0, abs(op))


def test_fresnel_vectorised_matches_scalar():
    k = np.array([1e5, 1e6, 1e7])
    rs, rp = fresnel_coefficients(k, 1e12, 3 + 2j)
    for i in range(3):
        a, b = fresnel_coefficients(k[i], 1e12, 3 + 2j)
        assert abs(rs[i] - a) <= 1e-14 * abs(a) and abs(rp[i] - b) <= 1e-14 * abs(b)


def test_fresnel_domain():
    with pytest.raises(DomainError):
        fresnel_coefficients(0.0, 1e12, 2.0)
