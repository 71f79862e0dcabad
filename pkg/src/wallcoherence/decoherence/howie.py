"""Single-loss event probability for an electron grazing a lossy surface.

The event density per unit frequency and lateral wave vector is::

    d2P/(dw dq) = coth(hbar w / 2 k T) * e^2 L / (2 pi^2 eps0 hbar v^2)
                  * Im lambda_e(q, w) * exp(-2 nu0 z) * C2

with the retarded surface loss function
``lambda_e = -2/(nu + eps nu0) + 2 beta^2/(nu + nu0)`` and
``nu0 = sqrt(q^2 + (w/v)^2 - (w/c)^2)``, ``nu = sqrt(q^2 + (w/v)^2 - eps (w/c)^2)``.
Wave vectors below ``alpha / dx`` cannot resolve the two paths and are
excluded; frequencies run up to the cutoff ``w_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..core import CONST, DomainError, Scenario
from .quadrature import QuadResult, quad_segments, quad_strict
from .specfun import (
    conductivity_dielectric,
    drude_dielectric,
    exponential_integral_e1,
    principal_sqrt,
    thermal_factor,
)

DEFAULT_CUTOFF = 0.6e12
DEFAULT_ALPHA = 1.0 / 8.0
_LOG_SPAN = 40.0  # lower frequency limit w_m * exp(-40)
_S_MAX = 80.0  # exp(-2 nu0 z) <= exp(-80) beyond, far below any tolerance


@dataclass(frozen=True)
class HowieSettings:
    """Knobs of the loss integral.

    ``dielectric`` selects "drude" (carrier density and effective mass) or
    "conductivity" (1 + i sigma / eps0 w).  ``temperature`` overrides the
    material temperature; 0 drops the thermal factor.
    """

    cutoff: float = DEFAULT_CUTOFF
    alpha: float = DEFAULT_ALPHA
    dielectric: str = "drude"
    rel_tol: float = 1e-4
    temperature: float | None = None

    def __post_init__(self) -> None:
        if not (self.cutoff > 0 and self.alpha > 0 and self.rel_tol > 0):
            raise DomainError("cutoff, alpha and rel_tol must be positive")
        if self.dielectric not in ("drude", "conductivity"):
            raise DomainError("dielectric must be 'drude' or 'conductivity'")
        if self.temperature is not None and self.temperature < 0:
            raise DomainError("temperature must be non-negative")


@dataclass(frozen=True)
class HowieIntegrandContext:
    q_x: float
    omega: float
    nu0: complex
    nu: complex
    lambda_e: complex
    epsilon: complex
    cutoff: float
    alpha: float
    value: float


def dielectric_function(scenario: Scenario, settings: HowieSettings):
    """Callable w -> eps(w) for the configured model."""
    mat = scenario.material
    if settings.dielectric == "conductivity":
        sigma = mat.conductivity
        return lambda w: conductivity_dielectric(w, sigma)
    if mat.carrier_density <= 0:
        raise DomainError(f"{mat.name}: the Drude model needs a carrier density")
    wp, gd = mat.plasma_frequency, mat.damping_rate
    return lambda w: drude_dielectric(w, wp, gd)


def _prefactor(scenario: Scenario) -> float:
    e, v = CONST.elementary_charge, scenario.beam.speed
    return e * e * scenario.geometry.interaction_length / (
        2 * math.pi**2 * CONST.vacuum_permittivity * CONST.hbar * v * v
    )


def integrand_context(
    scenario: Scenario, q_x: float, omega: float, settings: HowieSettings = HowieSettings(), c2: float = 1.0
) -> HowieIntegrandContext:
    """All intermediate quantities of the event density at one (q, w)."""
    eps = dielectric_function(scenario, settings)(omega)
    v, c = scenario.beam.speed, CONST.light_speed
    beta = v / c
    base = q_x * q_x + (omega / v) ** 2
    nu0 = principal_sqrt(base - (omega / c) ** 2)
    nu = principal_sqrt(base - eps * (omega / c) ** 2)
    lam = -2.0 / (nu + nu0 * eps) + 2.0 * beta * beta / (nu + nu0)
    T = scenario.material.temperature if settings.temperature is None else settings.temperature
    th = thermal_factor(omega, T)
    value = th * _prefactor(scenario) * lam.imag * math.exp(-2 * nu0.real * scenario.geometry.height) * c2
    return HowieIntegrandContext(q_x, omega, nu0, nu, lam, eps, settings.cutoff, settings.alpha, value)


def _double_integral(scenario: Scenario, settings: HowieSettings, c2: float, moment: bool) -> QuadResult:
    eps_fn = dielectric_function(scenario, settings)
    v, c = scenario.beam.speed, CONST.light_speed
    beta2 = (v / c) ** 2
    z = scenario.geometry.height
    q0 = settings.alpha / scenario.beam.coherence_length
    T = scenario.material.temperature if settings.temperature is None else settings.temperature
    pref = _prefactor(scenario) * c2
    tol = settings.rel_tol

    def inner(omega: float) -> float:
        eps = eps_fn(omega)
        kv2 = (omega / v) ** 2
        kc2 = (omega / c) ** 2

        def f(s: float) -> float:
            q = q0 + s / (2 * z)
            base = q * q + kv2
            nu0 = principal_sqrt(base - kc2)
            nu = principal_sqrt(base - eps * kc2)
            lam = -2.0 / (nu + nu0 * eps) + 2.0 * beta2 / (nu + nu0)
            return lam.imag * math.exp(-2 * nu0.real * z) / (2 * z)

        # s in [0, 1] directly, then s = exp(t) up to _S_MAX
        head = quad_strict(f, 0.0, 1.0, tol / 10).value
        tail = quad_strict(lambda t: f(math.exp(t)) * math.exp(t), 0.0, math.log(_S_MAX), tol / 10).value
        weight = thermal_factor(omega, T) * (CONST.hbar * omega if moment else 1.0)
        return (head + tail) * weight

    top = math.log(settings.cutoff)
    edges = np.linspace(top - _LOG_SPAN, top, 9)
    res = quad_segments(lambda u: inner(math.exp(u)) * math.exp(u), edges, tol)
    return QuadResult(pref * res.value, pref * res.error)


def howie_thermal_p(
    scenario: Scenario,
    cutoff: float = DEFAULT_CUTOFF,
    alpha: float = DEFAULT_ALPHA,
    c2: float = 1.0,
    settings: HowieSettings | None = None,
) -> float:
    """Mean number of loss events P (the decoherence amount).

    Raises `QuadratureError` when any sub-integral fails to converge.
    """
    s = replace(settings or HowieSettings(), cutoff=cutoff, alpha=alpha)
    if not 0 < c2 <= 1:
        raise DomainError("c2 must lie in (0, 1]")
    return _double_integral(scenario, s, c2, moment=False).value


def howie_energy_loss(
    scenario: Scenario,
    cutoff: float = DEFAULT_CUTOFF,
    alpha: float = DEFAULT_ALPHA,
    c2: float = 1.0,
    settings: HowieSettings | None = None,
) -> float:
    """First moment of the event density, hbar w weighted, in eV."""
    s = replace(settings or HowieSettings(), cutoff=cutoff, alpha=alpha)
    return _double_integral(scenario, s, c2, moment=True).value / CONST.elementary_charge


def howie_closed_form_p(scenario: Scenario, cutoff: float = DEFAULT_CUTOFF, alpha: float = DEFAULT_ALPHA) -> float:
    """Thermal-free, low-frequency good-conductor estimate.

    ``e^2 L w_m^2 / (4 pi^2 hbar sigma v^2) * E1(2 z alpha / dx)``.
    """
    if not (cutoff > 0 and alpha > 0):
        raise DomainError("cutoff and alpha must be positive")
    sigma = scenario.material.conductivity
    e, v = CONST.elementary_charge, scenario.beam.speed
    L = scenario.geometry.interaction_length
    x = 2 * scenario.geometry.height * alpha / scenario.beam.coherence_length
    return e * e * L * cutoff**2 / (4 * math.pi**2 * CONST.hbar * sigma * v * v) * exponential_integral_e1(x)
