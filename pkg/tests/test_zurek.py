from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wallcoherence.core import BeamParameters, DomainError, Geometry, Material, Scenario
from wallcoherence.decoherence.corrections import UNITY, CorrectionFactors
from wallcoherence.decoherence.zurek import (
    bounce_power,
    boyer_power,
    zurek_decoherence_amount,
    zurek_decoherence_time,
    zurek_energy_loss,
    zurek_relaxation_time,
)

E = 1.602176634e-19
H = 6.62607015e-34
HBAR = H / (2 * math.pi)
ME = 9.1093837015e-31
KB = 1.380649e-23


def test_boyer_power_oracle():
    # e^2 rho v^2 / (16 pi z^3), numbers written out
    p = boyer_power(5.0, 2.439e7, 6e-6)
    assert p == pytest.approx(E * E * 5.0 * 2.439e7**2 / (16 * math.pi * 6e-6**3), rel=1e-12)


def test_boyer_power_perfect_conductor_is_lossless():
    assert boyer_power(0.0, 2.4e7, 1e-6) == 0.0


@pytest.mark.parametrize("args", [(1.0, 2e7, 0.0), (1.0, 0.0, 1e-6), (-1.0, 2e7, 1e-6)])
def test_boyer_power_domain(args):
    with pytest.raises(DomainError):
        boyer_power(*args)


def test_bounce_power_reduces_to_constant_height():
    z = 2e-6
    assert bounce_power(3.0, 2e7, z**-3) == pytest.approx(boyer_power(3.0, 2e7, z), rel=1e-14)


def test_gaas_illuminated_energy_loss_oracle(presets):
    s = presets["gaas_illuminated"]
    v = 0.01 / 4.1e-10
    expected = E * 5.0 * v * v / (16 * math.pi * 6e-6**3) * 4.1e-10
    assert zurek_energy_loss(s) == pytest.approx(expected, rel=1e-12)
    assert zurek_energy_loss(s) == pytest.approx(18.0, rel=0.01)


def test_relaxation_time():
    assert zurek_relaxation_time(2e7, 1e-10) == pytest.approx(ME * 4e14 / 1e-10, rel=1e-9)
    with pytest.raises(DomainError):
        zurek_relaxation_time(2e7, 0.0)


def _scenario(rho, T, z, dx, v, L):
    return Scenario(
        Material("m", rho, temperature=T),
        BeamParameters(speed=v, coherence_length=dx),
        Geometry(height=z, interaction_length=L, time_of_flight=L / v),
    )


scenarios = st.builds(
    _scenario,
    rho=st.floats(1e-9, 1e7),
    T=st.floats(1.0, 1000.0),
    z=st.floats(1e-8, 1e-4),
    dx=st.floats(1e-9, 1e-5),
    v=st.floats(1e5, 1e8),
    L=st.floats(1e-4, 0.1),
)
corrections = st.builds(
    lambda a, b: CorrectionFactors(a, b, 1.0, 1.0), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0)
)


@settings(max_examples=1000)
@given(scenarios, corrections)
def test_dual_path_identity(s, corr):
    rd = zurek_decoherence_amount(zurek_energy_loss(s), s, corr)
    via_time = s.geometry.time_of_flight / zurek_decoherence_time(s, corr)
    assert rd == pytest.approx(via_time, rel=1e-9)


@given(scenarios, st.floats(1.01, 10.0))
def test_amount_increases_in_resistivity_temperature_and_width(s, f):
    base = zurek_decoherence_amount(zurek_energy_loss(s), s)
    for change in (
        {"resistivity": s.material.resistivity * f},
        {"temperature": s.material.temperature * f},
        {"coherence_length": s.beam.coherence_length * f},
    ):
        t = s.with_changes(**change)
        assert zurek_decoherence_amount(zurek_energy_loss(t), t) > base


@given(scenarios, st.floats(1.01, 10.0))
def test_amount_decreases_as_inverse_cube_of_height(s, f):
    base = zurek_decoherence_amount(zurek_energy_loss(s), s)
    t = s.with_changes(height=s.geometry.height * f)
    new = zurek_decoherence_amount(zurek_energy_loss(t), t)
    assert new < base
    assert new == pytest.approx(base / f**3, rel=1e-12)


def test_amount_uses_unity_corrections_by_default(presets):
    s = presets["gold"]
    de = zurek_energy_loss(s)
    assert zurek_decoherence_amount(de, s) == zurek_decoherence_amount(de, s, UNITY)


def test_amount_rejects_negative_loss(presets):
    with pytest.raises(DomainError):
        zurek_decoherence_amount(-1.0, presets["gold"])
