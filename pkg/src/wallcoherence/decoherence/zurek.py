"""Ohmic image-charge dissipation and the Caldeira-Leggett decoherence time."""
from __future__ import annotations

import math

from ..core import CONST, DomainError, Scenario, thermal_wavelength
from .corrections import UNITY, CorrectionFactors


def boyer_power(resistivity: float, speed: float, height: float) -> float:
    """Power (W) dissipated by an electron at ``height`` above a resistive plane.

    ``P = e^2 rho v^2 / (16 pi z^3)``.
    """
    if resistivity < 0:
        raise DomainError("resistivity must be non-negative")
    if not speed > 0:
        raise DomainError("speed must be positive")
    if not height > 0:
        raise DomainError("height must be positive (the image force diverges at the wall)")
    e = CONST.elementary_charge
    return e * e * resistivity * speed * speed / (16 * math.pi * height**3)


def bounce_power(resistivity: float, speed: float, mean_inverse_cube: float) -> float:
    """`boyer_power` with ``1/z^3`` replaced by a trajectory average ``<z^-3>``."""
    if not mean_inverse_cube > 0:
        raise DomainError("<z^-3> must be positive")
    return boyer_power(resistivity, speed, 1.0) * mean_inverse_cube


def zurek_energy_loss(scenario: Scenario, mean_inverse_cube: float | None = None) -> float:
    """Energy (eV) dissipated over the flight; constant height unless ``<z^-3>`` is given."""
    m, b, g = scenario.material, scenario.beam, scenario.geometry
    if mean_inverse_cube is None:
        power = boyer_power(m.resistivity, b.speed, g.height)
    else:
        power = bounce_power(m.resistivity, b.speed, mean_inverse_cube)
    return power * g.time_of_flight / CONST.elementary_charge


def zurek_relaxation_time(speed: float, power: float) -> float:
    """m v^2 / P."""
    if not power > 0:
        raise DomainError("power must be positive")
    return CONST.electron_mass * speed * speed / power


def zurek_decoherence_time(scenario: Scenario, corrections: CorrectionFactors = UNITY) -> float:
    """[4 h^2 / (pi e^2 k_B T rho)] z^3 / dx^2, divided by C1 C2."""
    m, b, g = scenario.material, scenario.beam, scenario.geometry
    h, e, kb = CONST.planck_h, CONST.elementary_charge, CONST.boltzmann
    base = 4 * h * h / (math.pi * e * e * kb * m.temperature * m.resistivity)
    return base * g.height**3 / b.coherence_length**2 / corrections.product


def zurek_decoherence_amount(
    energy_loss_ev: float, scenario: Scenario, corrections: CorrectionFactors = UNITY
) -> float:
    """(dx / lambda_th)^2 * dE / (m v^2) * C1 * C2."""
    if energy_loss_ev < 0:
        raise DomainError("energy loss must be non-negative")
    b = scenario.beam
    lam = thermal_wavelength(scenario.material.temperature)
    de = energy_loss_ev * CONST.elementary_charge
    return (b.coherence_length / lam) ** 2 * de / (CONST.electron_mass * b.speed**2) * corrections.product
