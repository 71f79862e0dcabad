"""Overlap correction factors C1 (image patch) and C2 (near/far-field width)."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..core import DomainError, Scenario, _positive


@dataclass(frozen=True)
class CorrectionFactors:
    """C1, C2 and the Gaussian widths used for C2.

    ``source`` is "geometry" when both factors were computed here, or
    "tabulated" when pinned by the scenario.
    """

    c1: float
    c2: float
    beam_width_w: float
    waist_w0: float
    source: str = "geometry"

    def __post_init__(self) -> None:
        if not (0 < self.c1 <= 1 and 0 < self.c2 <= 1):
            raise DomainError("correction factors must lie in (0, 1]")

    @property
    def product(self) -> float:
        return self.c1 * self.c2


def correction_c1(coherence_length: float, height: float) -> float:
    """min(1, (dx/z)^2)."""
    _positive("coherence_length", coherence_length)
    _positive("height", height)
    return min(1.0, (coherence_length / height) ** 2)


def gaussian_beam_width(waist: float, distance: float, wavelength: float) -> float:
    """w0 * sqrt(1 + (L lambda / (pi w0^2))^2)."""
    _positive("waist", waist)
    if distance < 0:
        raise DomainError("distance must be non-negative")
    _positive("wavelength", wavelength)
    zr = math.pi * waist * waist / wavelength
    return waist * math.hypot(1.0, distance / zr)


def correction_c2(coherence_length: float, width: float) -> float:
    """min(1, (dx/w)^2)."""
    _positive("coherence_length", coherence_length)
    _positive("width", width)
    return min(1.0, (coherence_length / width) ** 2)


def default_waist(scenario: Scenario) -> float:
    """Half the grating slit width: the 1/e field radius of the best Gaussian fit."""
    return 0.5 * scenario.geometry.grating_slit_width


def geometric_corrections(scenario: Scenario, waist: float | None = None) -> CorrectionFactors:
    """C1 from height, C2 from the slit beam grown over the grating-to-wall distance."""
    w0 = default_waist(scenario) if waist is None else waist
    dx = scenario.beam.coherence_length
    w = gaussian_beam_width(w0, scenario.geometry.grating_to_wall_distance, scenario.beam.de_broglie_wavelength)
    return CorrectionFactors(
        c1=correction_c1(dx, scenario.geometry.height),
        c2=correction_c2(dx, w),
        beam_width_w=w,
        waist_w0=w0,
    )


def scenario_corrections(scenario: Scenario, waist: float | None = None) -> CorrectionFactors:
    """Tabulated factors when the scenario pins them, geometric ones otherwise."""
    geo = geometric_corrections(scenario, waist)
    if scenario.corrections is None:
        return geo
    c1, c2 = scenario.corrections
    return CorrectionFactors(c1, c2, geo.beam_width_w, geo.waist_w0, source="tabulated")


UNITY = CorrectionFactors(1.0, 1.0, math.inf, math.inf, source="none")
