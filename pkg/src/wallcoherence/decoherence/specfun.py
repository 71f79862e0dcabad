"""Special functions and material response used by the loss models."""
from __future__ import annotations

import math

import numpy as np

from ..core import CONST, DomainError

_EULER_GAMMA = 0.57721566490153286061


def exponential_integral_e1(x: float) -> float:
    """Exponential integral E1(x) = int_x^inf exp(-t)/t dt for x > 0.

    Power series below x = 1, modified Lentz continued fraction above;
    both converge to machine precision.
    """
    x = float(x)
    if not x > 0:
        raise DomainError(f"E1 needs x > 0, got {x!r}")
    if x > 745:
        return 0.0
    if x <= 1.0:
        # E1 = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        total, term, k = 0.0, 1.0, 0
        while True:
            k += 1
            term *= -x / k
            add = term / k
            total += add
            if abs(add) < 1e-17 * abs(total):
                break
        return -_EULER_GAMMA - math.log(x) - total
    # E1 = exp(-x) / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x)


def bose_einstein(omega, T: float):
    """Mean thermal occupation 1/(exp(hbar w / k T) - 1); 0 where it underflows."""
    if not T > 0:
        raise DomainError("temperature must be positive")
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("frequency must be positive")
    x = CONST.hbar * w / (CONST.boltzmann * T)
    with np.errstate(over="ignore"):
        out = np.where(x > 700, 0.0, 1.0 / np.expm1(np.minimum(x, 700)))
    return float(out) if np.ndim(out) == 0 else out


def thermal_factor(omega, T: float):
    """coth(hbar w / 2 k T), i.e. 2 n + 1; tends to 1 as T -> 0."""
    w = np.asarray(omega, dtype=float)
    if T == 0:
        out = np.ones_like(w)
    else:
        x = CONST.hbar * w / (2 * CONST.boltzmann * T)
        with np.errstate(over="ignore"):
            out = np.where(x > 350, 1.0, 1.0 / np.tanh(np.maximum(x, 1e-300)))
    return float(out) if np.ndim(out) == 0 else out


def principal_sqrt(z):
    """Square root with Re >= 0; on the cut (Re = 0) the branch with Im >= 0."""
    r = np.sqrt(np.asarray(z, dtype=complex))
    flip = (r.real < 0) | ((r.real == 0) & (r.imag < 0))
    r = np.where(flip, -r, r)
    return complex(r) if np.ndim(r) == 0 else r


def drude_dielectric(omega, omega_p: float, gamma_d: float):
    """Drude permittivity 1 - w_p^2 / (w (w + i gamma))."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("frequency must be positive")
    out = 1.0 - omega_p**2 / (w * (w + 1j * gamma_d))
    return complex(out) if np.ndim(out) == 0 else out


def conductivity_dielectric(omega, sigma: float):
    """Low-frequency conductor permittivity 1 + i sigma / (eps0 w)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("frequency must be positive")
    out = 1.0 + 1j * sigma / (CONST.vacuum_permittivity * w)
    return complex(out) if np.ndim(out) == 0 else out


def fresnel_coefficients(k_par, omega, eps):
    """Reflection coefficients (r_s, r_p) of a half-space for wave vector ``k_par``.

    ``lam = sqrt(k^2 - w^2/c^2)`` in vacuum and ``kappa = sqrt(k^2 - eps w^2/c^2)``
    in the wall, both on the decaying branch; ``r_s = (lam - kappa)/(lam + kappa)``
    and ``r_p = (eps lam - kappa)/(eps lam + kappa)``.
    """
    k_par = np.asarray(k_par, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(k_par <= 0) or np.any(omega <= 0):
        raise DomainError("k_par and omega must be positive")
    q = (omega / CONST.light_speed) ** 2
    lam = principal_sqrt(k_par**2 - q)
    kap = principal_sqrt(k_par**2 - eps * q)
    rs = (lam - kap) / (lam + kap)
    rp = (eps * lam - kap) / (eps * lam + kap)
    return rs, rp
