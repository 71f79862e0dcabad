from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wallcoherence.core import DomainError
from wallcoherence.decoherence.corrections import (
    CorrectionFactors,
    correction_c1,
    correction_c2,
    default_waist,
    gaussian_beam_width,
    geometric_corrections,
    scenario_corrections,
)


def test_c1_saturates_at_one():
    assert correction_c1(1e-6, 1e-6) == 1.0
    assert correction_c1(2e-6, 1e-6) == 1.0
    assert correction_c1(0.4e-6, 6e-6) == pytest.approx((0.4 / 6) ** 2)


@given(st.floats(1e-9, 1e-4), st.floats(1e-9, 1e-4))
def test_factors_bounded(a, b):
    assert 0 < correction_c1(a, b) <= 1
    assert 0 < correction_c2(a, b) <= 1


def test_gaussian_width_oracle():
    w0, L, lam = 25e-9, 3e-3, 3e-11
    zr = math.pi * w0 * w0 / lam
    assert gaussian_beam_width(w0, L, lam) == pytest.approx(w0 * math.sqrt(1 + (L / zr) ** 2), rel=1e-14)
    assert gaussian_beam_width(w0, 0.0, lam) == w0
    with pytest.raises(DomainError):
        gaussian_beam_width(w0, -1.0, lam)


def test_default_waist_is_half_slit(presets):
    assert default_waist(presets["gold"]) == pytest.approx(25e-9)


def test_geometric_c1_values(geometric_presets):
    assert geometric_corrections(geometric_presets["gaas_illuminated"]).c1 == pytest.approx(0.0044, rel=0.1)
    assert geometric_corrections(geometric_presets["silicon"]).c1 == pytest.approx(0.055, rel=0.1)


def test_coherence_length_equal_to_height_gives_unit_c1(geometric_presets):
    s = geometric_presets["gaas_illuminated"]
    s = s.with_changes(coherence_length=s.geometry.height)
    assert geometric_corrections(s).c1 == 1.0


def test_tabulated_override(presets, geometric_presets):
    tab = scenario_corrections(presets["gaas_illuminated"])
    geo = scenario_corrections(geometric_presets["gaas_illuminated"])
    assert (tab.c1, tab.c2, tab.source) == (0.0044, 0.1, "tabulated")
    assert geo.source == "geometry"
    assert tab.beam_width_w == geo.beam_width_w


def test_invalid_factors():
    with pytest.raises(DomainError):
        CorrectionFactors(0.0, 0.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        CorrectionFactors(0.5, 1.5, 1.0, 1.0)
