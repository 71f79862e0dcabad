"""The five reference wall configurations and their comparison values."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping

from .core import (
    BeamParameters,
    CONST,
    Geometry,
    Material,
    Scenario,
    beam_speed_from_tof,
    coherence_length,
)

SCENARIO_NAMES: tuple[str, ...] = ("gaas_illuminated", "gaas_dark", "gold_channel", "silicon", "gold")

# Carrier densities follow N = 1 / (e rho mu) for the semiconductors.
_MOBILITY = {"gaas_illuminated": 0.03, "gaas_dark": 0.8, "silicon": 0.14}
_GOLD_DENSITY = 5.9e28

_TABLE: dict[str, dict[str, Any]] = {
    "gaas_illuminated": dict(material="GaAs (illuminated)", rho=5.0, mass=0.34, z=6e-6, L=0.01, t=4.1e-10,
                             wall=3e-3, corr=(0.0044, 0.1)),
    "gaas_dark": dict(material="GaAs (dark)", rho=2.5e6, mass=0.067, z=6e-6, L=0.01, t=4.1e-10,
                      wall=3e-3, corr=(0.0044, 0.1)),
    "gold_channel": dict(material="gold film 15 nm", rho=19e-8, mass=1.0, z=0.85e-6, L=1.5e-3, t=6.2e-11,
                         wall=5e-3, corr=(1.0, 0.18)),
    "silicon": dict(material="silicon", rho=1.5e-2, mass=0.26, z=1.7e-6, L=0.01, t=4.1e-10,
                    wall=3e-3, corr=(0.055, 0.1)),
    "gold": dict(material="gold", rho=2.4e-8, mass=1.0, z=1.7e-6, L=0.01, t=4.1e-10,
                 wall=3e-3, corr=(0.055, 0.1)),
}


def _density(name: str, rho: float) -> float:
    if name in _MOBILITY:
        return 1.0 / (CONST.elementary_charge * rho * _MOBILITY[name])
    return _GOLD_DENSITY


def preset(name: str, tabulated_corrections: bool = True) -> Scenario:
    """Reference scenario ``name`` (one of `SCENARIO_NAMES`).

    With ``tabulated_corrections`` the scenario pins (C1, C2) to the
    reference correction table, which is how the reference amounts were
    evaluated; otherwise they are derived from the geometry.
    """
    try:
        row = _TABLE[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}") from None
    v = beam_speed_from_tof(row["L"], row["t"])
    material = Material(
        name=row["material"],
        resistivity=row["rho"],
        temperature=300.0,
        effective_mass_ratio=row["mass"],
        carrier_density=_density(name, row["rho"]),
    )
    beam = BeamParameters(speed=v, coherence_length=coherence_length(12.7e-6, 2.0e-6, 0.24, v))
    geometry = Geometry(
        height=row["z"], interaction_length=row["L"], time_of_flight=row["t"], grating_to_wall_distance=row["wall"]
    )
    return Scenario(
        material=material,
        beam=beam,
        geometry=geometry,
        label=name,
        corrections=row["corr"] if tabulated_corrections else None,
    )


def all_presets(tabulated_corrections: bool = True) -> dict[str, Scenario]:
    return {n: preset(n, tabulated_corrections) for n in SCENARIO_NAMES}


@lru_cache(maxsize=1)
def _reference_text() -> str:
    return resources.files("wallcoherence").joinpath("data/reference_values.json").read_text()


def reference_values() -> Mapping[str, Any]:
    """Reference comparison values with tolerances and provenance tags (fresh copy)."""
    return json.loads(_reference_text())
