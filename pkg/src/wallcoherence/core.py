"""Physical constants, material/beam/geometry records and beam kinematics.

Everything is SI internally.  Helpers at the bottom convert the mixed units
used by the presets (eV, um, Ohm*cm) and load scenario JSON files
whose numeric fields must carry an explicit unit suffix.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from scipy import constants as _sc


class DomainError(ValueError):
    """Raised when an input lies outside the physical domain of an operation."""


class ScenarioFormatError(ValueError):
    """Raised for malformed or unit-less scenario files."""


@dataclass(frozen=True)
class PhysicalConstants:
    planck_h: float = _sc.h
    hbar: float = _sc.hbar
    elementary_charge: float = _sc.e
    electron_mass: float = _sc.m_e
    boltzmann: float = _sc.k
    vacuum_permittivity: float = _sc.epsilon_0
    light_speed: float = _sc.c

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not value > 0:
                raise DomainError(f"{name} must be positive")
        if abs(self.hbar - self.planck_h / (2 * math.pi)) > 1e-12 * self.hbar:
            raise DomainError("hbar inconsistent with planck_h")


CONST = PhysicalConstants()

# Dimensionless factor multiplying hbar/(p * theta); fixed once so that the
# 12.7 um / 2.0 um / 24 cm collimator at 2.439e7 m/s gives 400 nm.
# See `calibrate_coherence_length` for the derivation.
COHERENCE_CALIBRATION = 2.5808636871368353


def _positive(name: str, value: float) -> float:
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class Material:
    """Wall substance.  ``carrier_density`` and ``effective_mass_ratio`` only
    enter the Drude dielectric function."""

    name: str
    resistivity: float
    temperature: float = 300.0
    effective_mass_ratio: float = 1.0
    carrier_density: float = 0.0

    def __post_init__(self) -> None:
        _positive("resistivity", self.resistivity)
        _positive("temperature", self.temperature)
        if not 0 < self.effective_mass_ratio <= 1.1:
            raise DomainError("effective_mass_ratio must lie in (0, 1.1]")
        if self.carrier_density < 0:
            raise DomainError("carrier_density must be non-negative")

    @property
    def conductivity(self) -> float:
        return 1.0 / self.resistivity

    @property
    def effective_mass(self) -> float:
        return self.effective_mass_ratio * CONST.electron_mass

    @property
    def plasma_frequency(self) -> float:
        """Drude plasma frequency sqrt(N e^2 / (eps0 m*)) in rad/s."""
        e = CONST.elementary_charge
        return math.sqrt(self.carrier_density * e**2 / (CONST.vacuum_permittivity * self.effective_mass))

    @property
    def damping_rate(self) -> float:
        """Drude damping N e^2 rho / m* in rad/s."""
        e = CONST.elementary_charge
        return self.carrier_density * e**2 * self.resistivity / self.effective_mass


@dataclass(frozen=True)
class BeamParameters:
    speed: float
    coherence_length: float
    slit1_width: float = 12.7e-6
    slit2_width: float = 2.0e-6
    slit_separation: float = 0.24

    def __post_init__(self) -> None:
        _positive("speed", self.speed)
        if self.speed >= CONST.light_speed:
            raise DomainError("speed must be below c")
        _positive("coherence_length", self.coherence_length)

    @property
    def beta(self) -> float:
        return self.speed / CONST.light_speed

    @property
    def de_broglie_wavelength(self) -> float:
        return de_broglie_wavelength(self.speed)

    @property
    def kinetic_energy(self) -> float:
        """Non-relativistic kinetic energy in eV."""
        return 0.5 * CONST.electron_mass * self.speed**2 / CONST.elementary_charge


@dataclass(frozen=True)
class Geometry:
    height: float
    interaction_length: float
    time_of_flight: float
    grating_period: float = 100e-9
    grating_slit_width: float = 50e-9
    grating_to_wall_distance: float = 3e-3

    def __post_init__(self) -> None:
        _positive("height", self.height)
        _positive("interaction_length", self.interaction_length)
        if self.time_of_flight < 0:
            raise DomainError("time_of_flight must be non-negative")


@dataclass(frozen=True)
class Scenario:
    """One wall configuration.

    ``corrections`` optionally pins (C1, C2) to tabulated values instead of
    deriving them from the geometry; the presets carry the tabulated
    reference factors because the reference amounts were evaluated with them.
    """

    material: Material
    beam: BeamParameters
    geometry: Geometry
    label: str = "custom"
    corrections: tuple[float, float] | None = None
    notes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        g, v = self.geometry, self.beam.speed
        if g.time_of_flight > 0:
            mismatch = abs(g.time_of_flight * v - g.interaction_length) / g.interaction_length
            if mismatch > 1e-9:
                raise DomainError(
                    f"time_of_flight*speed differs from interaction_length by {mismatch:.2e} (relative)"
                )
        if self.corrections is not None:
            c1, c2 = self.corrections
            if not (0 < c1 <= 1 and 0 < c2 <= 1):
                raise DomainError("correction factors must lie in (0, 1]")

    def with_changes(self, **kwargs: Any) -> "Scenario":
        """Return a copy with material/beam/geometry fields replaced by name.

        Time of flight follows interaction length and speed automatically
        unless given explicitly.
        """
        parts = {"material": {}, "beam": {}, "geometry": {}}
        own = {}
        for key, value in kwargs.items():
            for part in parts:
                if key in getattr(self, part).__dataclass_fields__:
                    parts[part][key] = value
                    break
            else:
                own[key] = value
        material = replace(self.material, **parts["material"])
        beam = replace(self.beam, **parts["beam"])
        geom_changes = parts["geometry"]
        if "time_of_flight" not in geom_changes and ("interaction_length" in geom_changes or "speed" in parts["beam"]):
            length = geom_changes.get("interaction_length", self.geometry.interaction_length)
            geom_changes["time_of_flight"] = length / beam.speed
        geometry = replace(self.geometry, **geom_changes)
        return replace(self, material=material, beam=beam, geometry=geometry, **own)


# ---------------------------------------------------------------- operations

def beam_speed_from_tof(length: float, t_tof: float) -> float:
    _positive("length", length)
    _positive("t_tof", t_tof)
    return length / t_tof


def de_broglie_wavelength(v: float) -> float:
    if not 0 < v < CONST.light_speed:
        raise DomainError(f"speed must lie in (0, c), got {v!r}")
    return CONST.planck_h / (CONST.electron_mass * v)


def _raw_coherence_length(slit1_width: float, slit2_width: float, separation: float, v: float) -> float:
    theta = (slit1_width + slit2_width) / (2.0 * separation)
    momentum = CONST.electron_mass * v
    return CONST.hbar / (momentum * theta)


def coherence_length(
    slit1_width: float,
    slit2_width: float,
    separation: float,
    v: float,
    calibration: float = COHERENCE_CALIBRATION,
) -> float:
    """Transverse coherence length behind a two-slit collimator.

    The divergence (s1 + s2)/(2 D) times the momentum gives a momentum
    spread, and hbar over that spread is the position spread.  The result is
    scaled by ``calibration``.
    """
    _positive("separation", separation)
    _positive("slit1_width", slit1_width)
    _positive("slit2_width", slit2_width)
    _positive("v", v)
    return calibration * _raw_coherence_length(slit1_width, slit2_width, separation, v)


def calibrate_coherence_length(
    target: float = 400e-9,
    slit1_width: float = 12.7e-6,
    slit2_width: float = 2.0e-6,
    separation: float = 0.24,
    v: float = 0.01 / 4.1e-10,
) -> float:
    """Calibration factor that maps the given collimator onto ``target``."""
    return target / _raw_coherence_length(slit1_width, slit2_width, separation, v)


def thermal_wavelength(T: float) -> float:
    _positive("T", T)
    return CONST.hbar / math.sqrt(CONST.electron_mass * CONST.boltzmann * T)


# ------------------------------------------------------------ unit helpers

EV = CONST.elementary_charge


def ev_to_joule(x: float) -> float:
    return x * EV


def joule_to_ev(x: float) -> float:
    return x / EV


def um(x: float) -> float:
    return x * 1e-6


def ohm_cm_to_ohm_m(x: float) -> float:
    return x * 1e-2


_UNITS: dict[str, dict[str, float]] = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "temperature": {"K": 1.0},
    "resistivity": {"ohm_m": 1.0, "ohm_cm": 1e-2},
    "density": {"per_m3": 1.0, "per_cm3": 1e6},
    "speed": {"m_per_s": 1.0},
    "energy": {"eV": 1.0, "keV": 1e3},
    "dimensionless": {"ratio": 1.0},
}

_FIELDS: dict[str, dict[str, str]] = {
    "material": {
        "resistivity": "resistivity",
        "temperature": "temperature",
        "effective_mass": "dimensionless",
        "carrier_density": "density",
    },
    "beam": {
        "speed": "speed",
        "kinetic_energy": "energy",
        "coherence_length": "length",
        "slit1_width": "length",
        "slit2_width": "length",
        "slit_separation": "length",
    },
    "geometry": {
        "height": "length",
        "interaction_length": "length",
        "time_of_flight": "time",
        "grating_period": "length",
        "grating_slit_width": "length",
        "grating_to_wall_distance": "length",
    },
    "corrections": {"c1": "dimensionless", "c2": "dimensionless"},
}


def _parse_section(section: str, raw: Mapping[str, Any]) -> dict[str, float]:
    known = _FIELDS[section]
    out: dict[str, float] = {}
    for key, value in raw.items():
        if section == "material" and key == "name":
            continue
        for base, dim in known.items():
            prefix = base + "_"
            if key.startswith(prefix) and key[len(prefix):] in _UNITS[dim]:
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise ScenarioFormatError(f"{section}.{key} must be a number")
                out[base] = float(value) * _UNITS[dim][key[len(prefix):]]
                break
        else:
            raise ScenarioFormatError(
                f"{section}.{key}: unknown field or missing unit suffix "
                f"(expected one of {sorted(known)} with a unit suffix)"
            )
    return out


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    """Build a Scenario from the JSON layout written by `scenario_to_dict`."""
    unknown = set(data) - {"label", "material", "beam", "geometry", "corrections"}
    if unknown:
        raise ScenarioFormatError(f"unknown top-level keys: {sorted(unknown)}")
    try:
        mat = _parse_section("material", data["material"])
        beam = _parse_section("beam", data["beam"])
        geom = _parse_section("geometry", data["geometry"])
    except KeyError as exc:
        raise ScenarioFormatError(f"missing section {exc}") from None
    corr = _parse_section("corrections", data.get("corrections", {}))
    missing = [k for k in ("height", "interaction_length") if k not in geom] + (
        [] if "resistivity" in mat else ["resistivity"]
    )
    if missing:
        raise ScenarioFormatError(f"missing required field(s): {missing}")

    if "effective_mass" in mat:
        mat["effective_mass_ratio"] = mat.pop("effective_mass")
    material = Material(name=str(data["material"].get("name", "material")), **mat)

    if "kinetic_energy" in beam:
        energy = beam.pop("kinetic_energy") * EV
        beam.setdefault("speed", math.sqrt(2 * energy / CONST.electron_mass))
    if "speed" not in beam:
        if "interaction_length" in geom and "time_of_flight" in geom:
            beam["speed"] = beam_speed_from_tof(geom["interaction_length"], geom["time_of_flight"])
        else:
            raise ScenarioFormatError("beam speed cannot be determined")
    if "time_of_flight" not in geom:
        geom["time_of_flight"] = geom["interaction_length"] / beam["speed"]
    if "coherence_length" not in beam:
        beam["coherence_length"] = coherence_length(
            beam.get("slit1_width", 12.7e-6),
            beam.get("slit2_width", 2.0e-6),
            beam.get("slit_separation", 0.24),
            beam["speed"],
        )
    corrections = None
    if corr:
        if set(corr) != {"c1", "c2"}:
            raise ScenarioFormatError("corrections need both c1 and c2")
        corrections = (corr["c1"], corr["c2"])
    return Scenario(
        material=material,
        beam=BeamParameters(**beam),
        geometry=Geometry(**geom),
        label=str(data.get("label", "custom")),
        corrections=corrections,
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    out: dict[str, Any] = {
        "label": s.label,
        "material": {
            "name": s.material.name,
            "resistivity_ohm_m": s.material.resistivity,
            "temperature_K": s.material.temperature,
            "effective_mass_ratio": s.material.effective_mass_ratio,
            "carrier_density_per_m3": s.material.carrier_density,
        },
        "beam": {
            "speed_m_per_s": s.beam.speed,
            "coherence_length_m": s.beam.coherence_length,
            "slit1_width_m": s.beam.slit1_width,
            "slit2_width_m": s.beam.slit2_width,
            "slit_separation_m": s.beam.slit_separation,
        },
        "geometry": {
            "height_m": s.geometry.height,
            "interaction_length_m": s.geometry.interaction_length,
            "time_of_flight_s": s.geometry.time_of_flight,
            "grating_period_m": s.geometry.grating_period,
            "grating_slit_width_m": s.geometry.grating_slit_width,
            "grating_to_wall_distance_m": s.geometry.grating_to_wall_distance,
        },
    }
    if s.corrections is not None:
        out["corrections"] = {"c1_ratio": s.corrections[0], "c2_ratio": s.corrections[1]}
    return out


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
