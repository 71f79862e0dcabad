"""Visibility loss from the fluctuating surface field (Markov approximation).

The exponent is::

    Gamma = e^2 t / (eps0 hbar (2 pi)^2) * C2 * int dkx dky (1 - cos(kx dx))
            coth(hbar w / 2 k T) exp(-2 K z gamma) / (2 K gamma)
            * Im(r_p gamma_v^2 + r_s beta^2 kx^2 / K^2)

with ``w = |ky| v`` (Doppler-shifted frequency), ``K = |k_par|``,
``gamma_v^2 = 1 - beta^2 ky^2 / K^2`` and the propagation factor
``gamma = lambda / K = sqrt(1 - (w/cK)^2)``, which equals gamma_v here.
The integrand is even in both wave-vector components, so one quadrant is
integrated on logarithmic axes and multiplied by four.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..core import CONST, DomainError, Scenario
from .howie import dielectric_function, HowieSettings
from .quadrature import QuadratureError, quad_strict
from .specfun import bose_einstein, fresnel_coefficients, thermal_factor

_LOW = 30.0  # lower limits k = k_max * exp(-_LOW - ...) contribute nothing measurable
_HIGH = 60.0  # exp(-2 K z) <= exp(-120) above K = 60 / z


@dataclass(frozen=True)
class ScheelSettings:
    dielectric: str = "drude"
    rel_tol: float = 1e-3
    separation: float | None = None  # defaults to the coherence length

    def __post_init__(self) -> None:
        if self.dielectric not in ("drude", "conductivity"):
            raise DomainError("dielectric must be 'drude' or 'conductivity'")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")


@dataclass(frozen=True)
class ScheelIntegrandContext:
    k_x: float
    k_y: float
    k_parallel: float
    cos_phi: float
    gamma_v2: float
    separation: float
    r_s: complex
    r_p: complex
    gamma: float
    n_thermal: float
    plasma_frequency: float
    damping: float
    value: float


def _prefactor(scenario: Scenario) -> float:
    e = CONST.elementary_charge
    return e * e * scenario.geometry.time_of_flight / (CONST.vacuum_permittivity * CONST.hbar * (2 * math.pi) ** 2)


def _integrand(kx, ky, eps_fn, v: float, z: float, sep: float, T: float):
    """Integrand at (kx, ky); ``kx`` may be an array."""
    kx = np.asarray(kx, dtype=float)
    K = np.hypot(kx, ky)
    w = abs(ky) * v
    if w == 0.0:
        return np.zeros_like(kx)
    beta2 = (v / CONST.light_speed) ** 2
    rs, rp = fresnel_coefficients(K, w, eps_fn(w))
    gv2 = 1.0 - beta2 * (ky / K) ** 2
    g = np.sqrt(gv2)
    im = np.imag(rp * gv2 + rs * beta2 * kx * kx / (K * K))
    return (1.0 - np.cos(kx * sep)) * thermal_factor(w, T) * np.exp(-2 * K * z * g) / (2 * K * g) * im


_GL_LO = np.polynomial.legendre.leggauss(16)
_GL_HI = np.polynomial.legendre.leggauss(32)


def _gauss(f, a: float, b: float, rule) -> float:
    x, w = rule
    h = 0.5 * (b - a)
    return float(h * np.dot(w, f(a + h * (x + 1.0))))


def _adaptive_panels(f, edges, rel_tol: float, abs_tol: float, max_depth: int = 12) -> float:
    """Vectorised adaptive Gauss-Legendre: bisect panels until 16- and 32-point rules agree.

    Panels are accepted against an absolute floor of ``rel_tol`` times a
    coarse estimate of the whole integral, so negligible panels do not
    chase roundoff.
    """
    coarse = sum(abs(_gauss(f, a, b, _GL_HI)) for a, b in zip(edges[:-1], edges[1:]))
    abs_tol = max(abs_tol, rel_tol * coarse / (4 * len(edges)))
    stack = [(a, b, 0) for a, b in zip(edges[:-1], edges[1:])]
    parts: list[float] = []
    while stack:
        a, b, depth = stack.pop()
        hi = _gauss(f, a, b, _GL_HI)
        lo = _gauss(f, a, b, _GL_LO)
        if abs(hi - lo) <= max(rel_tol * abs(hi), abs_tol):
            parts.append(hi)
        elif depth >= max_depth:
            raise QuadratureError("panel refinement exhausted", (a, b), f"estimates {lo:.6e} vs {hi:.6e}")
        else:
            m = 0.5 * (a + b)
            stack += [(a, m, depth + 1), (m, b, depth + 1)]
    return math.fsum(parts)


def integrand_context(
    scenario: Scenario, kx: float, ky: float, settings: ScheelSettings = ScheelSettings()
) -> ScheelIntegrandContext:
    eps_fn = dielectric_function(scenario, HowieSettings(dielectric=settings.dielectric))
    v, z = scenario.beam.speed, scenario.geometry.height
    sep = settings.separation or scenario.beam.coherence_length
    K = math.hypot(kx, ky)
    w = abs(ky) * v
    rs, rp = fresnel_coefficients(K, w, eps_fn(w))
    beta2 = (v / CONST.light_speed) ** 2
    gv2 = 1.0 - beta2 * (ky / K) ** 2
    mat = scenario.material
    return ScheelIntegrandContext(
        k_x=kx, k_y=ky, k_parallel=K, cos_phi=ky / K, gamma_v2=gv2, separation=sep,
        r_s=complex(rs), r_p=complex(rp), gamma=math.sqrt(gv2),
        n_thermal=bose_einstein(w, mat.temperature),
        plasma_frequency=mat.plasma_frequency if mat.carrier_density > 0 else 0.0,
        damping=mat.damping_rate if mat.carrier_density > 0 else 0.0,
        value=_prefactor(scenario) * float(_integrand(kx, ky, eps_fn, v, z, sep, mat.temperature)),
    )


def scheel_gamma(
    scenario: Scenario,
    separation: float | None = None,
    c2: float = 1.0,
    settings: ScheelSettings | None = None,
) -> float:
    """Visibility exponent Gamma for path separation ``separation`` (default dx).

    Raises `QuadratureError` naming the worst (failing) sub-region.
    """
    s = settings or ScheelSettings()
    if separation is not None:
        s = replace(s, separation=separation)
    if not 0 < c2 <= 1:
        raise DomainError("c2 must lie in (0, 1]")
    t = scenario.geometry.time_of_flight
    if t == 0:
        return 0.0
    eps_fn = dielectric_function(scenario, HowieSettings(dielectric=s.dielectric))
    v, z = scenario.beam.speed, scenario.geometry.height
    sep = s.separation or scenario.beam.coherence_length
    T = scenario.material.temperature
    top = math.log(_HIGH / z)
    # the (1 - cos) factor switches on at kx ~ 1/sep; start well below
    kx_lo = min(math.log(1e-3 / sep), top - 20)
    ky_lo = top - _LOW - 20
    kx_edges = np.linspace(kx_lo, top, 7)
    tol = s.rel_tol

    def inner(u: float) -> float:
        ky = math.exp(u)

        def g(r):
            kx = np.exp(r)
            return _integrand(kx, ky, eps_fn, v, z, sep, T) * kx

        try:
            return _adaptive_panels(g, kx_edges, tol / 10, 0.0) * ky
        except QuadratureError as exc:
            a, b = exc.region
            raise QuadratureError(
                "inner k_x integral failed", (math.exp(a), math.exp(b)), f"at k_y={ky:.4g} 1/m"
            ) from exc

    outer_edges = np.linspace(ky_lo, top, 9)
    total = 0.0
    for a, b in zip(outer_edges[:-1], outer_edges[1:]):
        try:
            total += quad_strict(inner, a, b, tol, abs_tol=1e-40).value
        except QuadratureError as exc:
            raise QuadratureError("outer k_y integral failed", (math.exp(a), math.exp(b)), str(exc)) from exc
    return 4.0 * _prefactor(scenario) * c2 * total
