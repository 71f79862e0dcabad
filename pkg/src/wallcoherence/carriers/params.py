"""Rate constants and illumination profiles for the carrier models."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping

import numpy as np

from ..core import DomainError, ScenarioFormatError


@dataclass(frozen=True)
class RateParameters:
    """Transport and kinetic constants (SI).

    Mobilities and diffusivities default to the GaAs values quoted in
    cm-based units, converted to m^2.  The capture, emission and trap
    constants are fit knobs tuned so the super-bandgap steady state has a
    trapped (negative) core with hole-rich (positive) wings and a trap
    release rate below 1/s.

    Attributes
    ----------
    mu_n, mu_p : float
        Electron and hole mobilities, m^2/(V s).
    d_n, d_p : float
        Diffusion coefficients, m^2/s.
    c_np : float
        Band-to-band capture coefficient, m^3/s.
    c_nt : float
        Capture coefficient into empty traps, m^3/s.
    e_tn : float
        Thermal emission rate out of traps, 1/s.
    sigma_opt : float
        Optical detrapping cross-section, m^2.
    photon_flux : float
        Peak incident photon flux, 1/(m^2 s).
    reflectivity, quantum_efficiency : float
        Surface reflectivity and pair-generation efficiency.
    n0, p0 : float
        Dark carrier densities, m^-3.
    trap_density : float
        Total trap density, m^-3.
    relative_permittivity : float
        Static dielectric constant of the wall.
    surface_recombination_velocity : float
        Pair removal velocity at the illuminated face (2D model only), m/s.
    """

    mu_n: float = 0.8
    mu_p: float = 0.03
    d_n: float = 0.02
    d_p: float = 1e-3
    c_np: float = 1e-6
    c_nt: float = 3e-14
    e_tn: float = 10.0
    sigma_opt: float = 1e-22
    photon_flux: float = 1e22
    reflectivity: float = 0.3
    quantum_efficiency: float = 0.7
    n0: float = 1e12
    p0: float = 1e12
    trap_density: float = 3e18
    relative_permittivity: float = 12.9
    surface_recombination_velocity: float = 1e4

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{f.name} must be finite and non-negative, got {v!r}")
        if self.reflectivity > 1 or self.quantum_efficiency > 1:
            raise DomainError("reflectivity and quantum_efficiency must lie in [0, 1]")
        if self.relative_permittivity < 1:
            raise DomainError("relative_permittivity must be >= 1")

    @property
    def absorbed_flux(self) -> float:
        """Pairs generated per unit area and time at the beam centre."""
        return self.photon_flux * (1 - self.reflectivity) * self.quantum_efficiency

    @property
    def trap_equilibrium(self) -> float:
        """Dark trap occupancy where capture of n0 balances thermal emission."""
        k = self.c_nt * self.n0
        if k == 0:
            return 0.0
        return self.trap_density * k / (k + self.e_tn)

    def with_changes(self, **kw: Any) -> "RateParameters":
        return replace(self, **kw)


_KINDS = ("single-gaussian", "two-gaussian", "off")


@dataclass(frozen=True)
class IlluminationProfile:
    """Lateral laser profile and absorption depth.

    ``lateral(x)`` is normalised to 1 at the centre of the primary Gaussian
    (``exp(-(x - x0)^2 / w^2)``); the optional secondary Gaussian is
    concentric and ``secondary_relative_strength`` times as strong.
    ``intensity`` scales the whole profile (0 turns the laser off).
    """

    kind: str = "single-gaussian"
    center: float = 0.0
    width: float = 100e-6
    secondary_width: float = 750e-6
    secondary_relative_strength: float = 0.2
    penetration_depth: float = 0.3e-6
    intensity: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DomainError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if not (self.width > 0 and self.secondary_width > 0 and self.penetration_depth > 0):
            raise DomainError("widths and penetration depth must be positive")
        if self.secondary_relative_strength < 0 or self.intensity < 0:
            raise DomainError("strengths must be non-negative")

    @property
    def is_dark(self) -> bool:
        return self.kind == "off" or self.intensity == 0

    def lateral(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_dark:
            return np.zeros_like(x)
        out = np.exp(-((x - self.center) / self.width) ** 2)
        if self.kind == "two-gaussian":
            out = out + self.secondary_relative_strength * np.exp(
                -((x - self.center) / self.secondary_width) ** 2
            )
        return self.intensity * out

    def depth(self, z: np.ndarray) -> np.ndarray:
        """Beer-Lambert absorption density (1/m) at depth ``z`` below the surface."""
        z = np.asarray(z, dtype=float)
        return np.exp(-z / self.penetration_depth) / self.penetration_depth

    def with_changes(self, **kw: Any) -> "IlluminationProfile":
        return replace(self, **kw)


SUPER_BANDGAP = IlluminationProfile(kind="single-gaussian", width=100e-6, penetration_depth=0.3e-6)
SUB_BANDGAP = IlluminationProfile(
    kind="two-gaussian",
    width=150e-6,
    secondary_width=750e-6,
    secondary_relative_strength=0.2,
    penetration_depth=1e-3,
)


def rate_parameters_from_dict(data: Mapping[str, Any]) -> RateParameters:
    """Build `RateParameters` from a mapping, rejecting unknown keys."""
    known = {f.name for f in fields(RateParameters)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioFormatError(f"unknown rate parameter(s): {sorted(unknown)}")
    try:
        return RateParameters(**{k: float(v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise ScenarioFormatError(str(exc)) from exc


def illumination_from_dict(data: Mapping[str, Any]) -> IlluminationProfile:
    """Build `IlluminationProfile` from a mapping, rejecting unknown keys."""
    known = {f.name for f in fields(IlluminationProfile)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioFormatError(f"unknown illumination field(s): {sorted(unknown)}")
    kw = {k: (v if k == "kind" else float(v)) for k, v in data.items()}
    return IlluminationProfile(**kw)
