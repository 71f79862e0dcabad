from __future__ import annotations

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wallcoherence.core import (
    COHERENCE_CALIBRATION,
    CONST,
    BeamParameters,
    DomainError,
    Geometry,
    Material,
    Scenario,
    ScenarioFormatError,
    beam_speed_from_tof,
    calibrate_coherence_length,
    coherence_length,
    de_broglie_wavelength,
    load_scenario,
    ohm_cm_to_ohm_m,
    scenario_from_dict,
    scenario_to_dict,
    thermal_wavelength,
)
from wallcoherence.presets import SCENARIO_NAMES, preset


def test_speed_from_time_of_flight():
    assert beam_speed_from_tof(0.01, 4.1e-10) == pytest.approx(2.4390243902439024e7, rel=1e-15)


@pytest.mark.parametrize("length, t", [(0.0, 1e-9), (0.01, 0.0), (-1.0, 1e-9)])
def test_speed_rejects_non_positive(length, t):
    with pytest.raises(DomainError):
        beam_speed_from_tof(length, t)


def test_de_broglie_wavelength_oracle():
    v = 2.439e7
    assert de_broglie_wavelength(v) == pytest.approx(6.62607015e-34 / (9.1093837015e-31 * v), rel=1e-9)
    with pytest.raises(DomainError):
        de_broglie_wavelength(CONST.light_speed)


def test_coherence_length_calibrated_to_400_nm():
    v = 0.01 / 4.1e-10
    assert coherence_length(12.7e-6, 2.0e-6, 0.24, v) == pytest.approx(400e-9, rel=1e-12)
    assert calibrate_coherence_length() == pytest.approx(COHERENCE_CALIBRATION, rel=1e-12)


def test_coherence_length_scales_inversely_with_speed_and_divergence():
    base = coherence_length(12.7e-6, 2.0e-6, 0.24, 2e7)
    assert coherence_length(12.7e-6, 2.0e-6, 0.24, 4e7) == pytest.approx(base / 2, rel=1e-14)
    assert coherence_length(25.4e-6, 4.0e-6, 0.24, 2e7) == pytest.approx(base / 2, rel=1e-14)
    assert coherence_length(12.7e-6, 2.0e-6, 0.48, 2e7) == pytest.approx(base * 2, rel=1e-14)


def test_thermal_wavelength_oracle():
    # hbar / sqrt(m k T) at 300 K
    expected = 1.054571817e-34 / math.sqrt(9.1093837015e-31 * 1.380649e-23 * 300.0)
    assert thermal_wavelength(300.0) == pytest.approx(expected, rel=1e-9)


def test_unit_helpers():
    assert ohm_cm_to_ohm_m(500.0) == pytest.approx(5.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(resistivity=0.0),
        dict(resistivity=-1.0),
        dict(resistivity=1.0, temperature=0.0),
        dict(resistivity=1.0, effective_mass_ratio=0.0),
        dict(resistivity=1.0, carrier_density=-1.0),
    ],
)
def test_material_validation(kwargs):
    with pytest.raises(DomainError):
        Material(name="x", **kwargs)


def test_plasma_frequency_scales_with_inverse_root_mass():
    light = Material("a", 1.0, effective_mass_ratio=0.34, carrier_density=1e20)
    heavy = Material("b", 1.0, effective_mass_ratio=0.067, carrier_density=1e20)
    assert heavy.plasma_frequency / light.plasma_frequency == pytest.approx(math.sqrt(0.34 / 0.067), rel=1e-12)


def test_scenario_rejects_inconsistent_time_of_flight():
    with pytest.raises(DomainError):
        Scenario(
            Material("m", 1.0),
            BeamParameters(2e7, 4e-7),
            Geometry(height=1e-6, interaction_length=0.01, time_of_flight=1e-9),
        )


def test_with_changes_keeps_time_of_flight_consistent():
    s = preset("gaas_illuminated")
    d = s.with_changes(interaction_length=0.02)
    assert d.geometry.time_of_flight == pytest.approx(2 * s.geometry.time_of_flight, rel=1e-14)
    h = s.with_changes(height=1e-6, resistivity=1.0)
    assert h.geometry.height == 1e-6 and h.material.resistivity == 1.0


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_scenario_json_round_trip(name, tmp_path):
    s = preset(name)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario_to_dict(s)))
    back = load_scenario(path)
    assert back == s


def test_scenario_json_unit_suffixes():
    data = {
        "material": {"name": "x", "resistivity_ohm_cm": 500, "temperature_K": 300},
        "beam": {"kinetic_energy_keV": 1.7},
        "geometry": {"height_um": 6, "interaction_length_cm": 1},
    }
    s = scenario_from_dict(data)
    assert s.material.resistivity == pytest.approx(5.0)
    assert s.geometry.height == pytest.approx(6e-6)
    assert s.beam.speed == pytest.approx(math.sqrt(2 * 1700 * CONST.elementary_charge / CONST.electron_mass))
    assert s.geometry.time_of_flight == pytest.approx(0.01 / s.beam.speed)


@pytest.mark.parametrize(
    "data",
    [
        {"material": {"resistivity": 5}, "beam": {"speed_m_per_s": 2e7}, "geometry": {"height_m": 1e-6, "interaction_length_m": 0.01}},
        {"material": {"resistivity_ohm_m": 5}, "beam": {"speed_m_per_s": 2e7}, "geometry": {"height_m": 1e-6}},
        {"material": {"resistivity_ohm_m": 5}, "beam": {}, "geometry": {"height_m": 1e-6, "interaction_length_m": 0.01}},
        {"material": {"resistivity_ohm_m": "5"}, "beam": {"speed_m_per_s": 2e7}, "geometry": {"height_m": 1e-6, "interaction_length_m": 0.01}},
        {"extra": 1, "material": {}, "beam": {}, "geometry": {}},
    ],
)
def test_scenario_json_errors(data):
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict(data)


@given(st.floats(1e5, 1e8), st.floats(1e-4, 1.0))
def test_tof_speed_length_identity(v, length):
    t = length / v
    assert beam_speed_from_tof(length, t) == pytest.approx(v, rel=1e-14)
