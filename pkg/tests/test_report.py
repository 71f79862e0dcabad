from __future__ import annotations

import json
import math

import pytest

from wallcoherence.core import DomainError, Material
from wallcoherence.decoherence.report import (
    MODELS,
    TableCell,
    cells_to_csv,
    cells_to_json,
    fmt,
    fmt2,
    full_report,
    locate_matching_height,
    reports_to_json,
    table1,
    table2,
    table_layout_csv,
    within,
)
from wallcoherence.presets import SCENARIO_NAMES, preset, reference_values


@pytest.fixture(scope="module")
def gold_reports():
    return full_report(preset("gold"))


def test_full_report_order_and_fields(gold_reports):
    assert [r.model for r in gold_reports] == ["Zurek", "Howie", "ScheelMarkov"]
    z, h, s = gold_reports
    assert z.relaxation_time is not None and h.relaxation_time is None
    assert s.energy_loss is None
    assert z.corrections.source == "tabulated"
    for r in gold_reports:
        assert r.decoherence_time == pytest.approx(4.1e-10 / r.decoherence_amount, rel=1e-12)


def test_gold_column_values(gold_reports):
    z, h, s = gold_reports
    assert z.energy_loss == pytest.approx(3.8e-6, rel=0.05)
    assert z.decoherence_amount == pytest.approx(3.4e-7, rel=0.10)
    assert 0.32 / 2 <= h.decoherence_amount <= 0.32 * 2


def test_reports_json_round_trip(gold_reports):
    data = json.loads(reports_to_json(gold_reports))
    assert [d["model"] for d in data] == ["Zurek", "Howie", "ScheelMarkov"]


def test_model_filter():
    reps = full_report(preset("gaas_dark"), models=("zurek",))
    assert len(reps) == 1 and reps[0].model == "Zurek"
    with pytest.raises(DomainError):
        full_report(preset("gaas_dark"), models=("nope",))


def test_zero_resistivity_not_constructible():
    with pytest.raises(DomainError):
        Material("perfect conductor", resistivity=0.0)


def test_unphysical_loss_flagged():
    s = preset("gold_channel").with_changes(resistivity=1e3)
    z = full_report(s, models=("zurek",))[0]
    assert z.unphysical_loss


@pytest.mark.parametrize(
    "computed, reference, tol, ok",
    [
        (1.04, 1.0, {"kind": "relative", "value": 0.05}, True),
        (1.06, 1.0, {"kind": "relative", "value": 0.05}, False),
        (0.51, 1.0, {"kind": "factor", "value": 2.0}, True),
        (2.01, 1.0, {"kind": "factor", "value": 2.0}, False),
        (0.0, 0.0, {"kind": "factor", "value": 2.0}, True),
    ],
)
def test_within(computed, reference, tol, ok):
    assert within(computed, reference, tol) is ok


def test_within_unknown_kind():
    with pytest.raises(DomainError):
        within(1.0, 1.0, {"kind": "absolute", "value": 1})


def test_locate_matching_height_synthetic():
    s = preset("gold")
    z_star = 3.1e-6

    def f(sc):
        return (z_star / sc.geometry.height) ** 3

    z = locate_matching_height(f, s, 1.0)
    assert z == pytest.approx(z_star, rel=1e-3)
    assert locate_matching_height(f, s, 1e30) is None


def test_table1_zurek_only():
    cells = table1({n: preset(n) for n in SCENARIO_NAMES}, reference_values(), models=("zurek",))
    assert {c.quantity for c in cells} == {"zurek_energy_loss_eV", "zurek_decoherence_amount"}
    status = {(c.scenario, c.quantity): c.status for c in cells}
    assert status[("gold_channel", "zurek_energy_loss_eV")] == "ungated"
    assert status[("gaas_illuminated", "zurek_energy_loss_eV")] == "pass"
    layout = table_layout_csv(cells, list(SCENARIO_NAMES))
    assert layout.splitlines()[0] == "quantity," + ",".join(SCENARIO_NAMES)


def test_table2_rows():
    cells = table2({n: preset(n, False) for n in SCENARIO_NAMES}, reference_values())
    got = {(c.scenario, c.quantity): c for c in cells}
    assert set(got) == {(r, q) for r in ("gaas", "gold_channel", "silicon_gold") for q in ("c1", "c2")}
    assert got[("gaas", "c1")].status == "pass"
    assert got[("gold_channel", "c1")].status == "ungated"


def test_cell_ratio_and_gating():
    c = TableCell("a", "q", 2.0, 4.0, "ungated")
    assert c.ratio == 0.5 and not c.gated
    assert TableCell("a", "q", None, 4.0, "error").ratio is None


def test_serialisation_helpers():
    cells = [TableCell("a", "q", 1.0 / 3, 0.3, "pass")]
    assert "0.3333333333333333" in cells_to_csv(cells)
    assert json.loads(cells_to_json(cells))[0]["status"] == "pass"
    assert fmt(None) == "" and fmt2(12345.0) == "1.2e+04"


def test_reference_values_fresh_copy():
    a = reference_values()
    a["table1"] = None
    assert reference_values()["table1"] is not None
    assert reference_values()["columns"] == list(SCENARIO_NAMES)


def test_reference_rows_have_sources():
    ref = reference_values()
    for row in ref["table1"].values():
        assert row["source"] and set(row["values"]) == set(SCENARIO_NAMES)


def test_models_constant():
    assert MODELS == ("zurek", "howie", "scheel")
    assert math.isfinite(preset("gold").beam.coherence_length)
