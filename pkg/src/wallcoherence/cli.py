"""Command-line front end.

Exit codes: 0 all gated checks pass, 1 physics mismatch, 2 configuration
error, 3 numerical failure.  Outputs are written to ``--out`` with fixed
float formatting so identical runs give identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import presets
from .carriers.params import (
    SUB_BANDGAP,
    SUPER_BANDGAP,
    IlluminationProfile,
    RateParameters,
    illumination_from_dict,
    rate_parameters_from_dict,
)
from .carriers.solver import ConvergenceError, chopped_response, default_mesh_1d, default_mesh_2d
from .core import DomainError, Scenario, ScenarioFormatError, load_scenario
from .decoherence.corrections import geometric_corrections
from .decoherence.howie import HowieSettings, howie_thermal_p
from .decoherence.quadrature import QuadratureError
from .decoherence.report import (
    MODELS,
    cells_to_csv,
    cells_to_json,
    fmt,
    full_report,
    reports_to_json,
    table1,
    table2,
    table_layout_csv,
    zurek_bounce_family,
)
from .decoherence.scheel import ScheelSettings
from .decoherence.zurek import zurek_energy_loss
from .optics.diffraction import diffraction_pattern
from .optics.gap import GapGeometry, gap_transmission
from .optics.scan import deflection_scan

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("table1", "table2", "report", "deflect", "chop", "diffract", "gap", "sweep", "sensitivity")


class ConfigError(ValueError):
    """Bad command-line or configuration input (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one invocation."""

    command: str
    scenarios: tuple[str, ...] = ()
    models: tuple[str, ...] = MODELS
    out: str = "."
    format: str = "csv"
    tol: float | None = None
    quad_tol: float | None = None
    sweep: tuple[str, ...] = ()
    params: str | None = None
    light: str = "super"
    frequencies: tuple[float, ...] = (4.0, 10.0, 20.0)
    rd: tuple[float, ...] = (0.0, 0.15, 1.0)
    survival: float = 1.0
    z_min: float = 1e-9
    coherence_length: float | None = None
    method: str = "approx"
    cells: int = 120

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")
        bad = set(self.models) - set(MODELS)
        if bad:
            raise ConfigError(f"unknown model(s) {sorted(bad)}; choose from {', '.join(MODELS)}")
        if self.light not in ("super", "sub"):
            raise ConfigError("--light must be super or sub")
        if self.method not in ("approx", "trace"):
            raise ConfigError("--method must be approx or trace")
        for name in ("tol", "quad_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"--{name.replace('_', '-')} must be positive")


def config_from_mapping(data: Mapping[str, Any], base: RunConfig) -> RunConfig:
    """Overlay a JSON config on ``base``; unknown keys are rejected."""
    known = {f.name for f in fields(RunConfig)} - {"command"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    try:
        return replace(base, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class Sweep:
    name: str
    values: tuple[float, ...]


def parse_sweep(text: str) -> Sweep:
    """``param=lo:hi:n`` (linear) or ``param=lo:hi:n:log``."""
    try:
        name, rng = text.split("=", 1)
        parts = rng.split(":")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        log = len(parts) == 4 and parts[3] == "log"
        if len(parts) not in (3, 4) or (len(parts) == 4 and not log):
            raise ValueError
    except (ValueError, IndexError):
        raise ConfigError(f"bad --sweep {text!r}; expected param=lo:hi:n[:log]") from None
    if n < 1:
        raise ConfigError("sweep needs n >= 1")
    vals = np.geomspace(lo, hi, n) if log else np.linspace(lo, hi, n)
    return Sweep(name.strip(), tuple(float(v) for v in vals))


# ---------------------------------------------------------------- output


class Output:
    """Collects named artifacts and writes them in a fixed order."""

    def __init__(self, directory: str) -> None:
        self.dir = Path(directory)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def write(self) -> None:
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            for name in sorted(self.files):
                (self.dir / name).write_text(self.files[name])
        except OSError as exc:
            raise ConfigError(f"cannot write to {self.dir}: {exc}") from exc


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------- inputs


def _scenarios(cfg: RunConfig) -> dict[str, Scenario]:
    if not cfg.scenarios:
        return presets.all_presets()
    out = {}
    for item in cfg.scenarios:
        if item in presets.SCENARIO_NAMES:
            out[item] = presets.preset(item)
        else:
            try:
                sc = load_scenario(item)
            except FileNotFoundError as exc:
                raise ConfigError(f"scenario file not found: {item}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{item}: invalid JSON ({exc})") from exc
            out[sc.label if sc.label not in out else item] = sc
    return out


def _howie(cfg: RunConfig) -> HowieSettings:
    return HowieSettings() if cfg.quad_tol is None else HowieSettings(rel_tol=cfg.quad_tol)


def _scheel(cfg: RunConfig) -> ScheelSettings:
    return ScheelSettings() if cfg.quad_tol is None else ScheelSettings(rel_tol=cfg.quad_tol)


def _rate_params(cfg: RunConfig) -> tuple[RateParameters, IlluminationProfile]:
    light = SUPER_BANDGAP if cfg.light == "super" else SUB_BANDGAP
    if cfg.params is None:
        return RateParameters(), light
    try:
        data = json.loads(Path(cfg.params).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"parameter file not found: {cfg.params}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{cfg.params}: invalid JSON ({exc})") from exc
    unknown = set(data) - {"rates", "illumination"}
    if unknown:
        raise ConfigError(f"unknown parameter section(s): {sorted(unknown)}")
    params = rate_parameters_from_dict(data.get("rates", {}))
    if "illumination" in data:
        light = illumination_from_dict({**asdict(light), **data["illumination"]})
    return params, light


# ---------------------------------------------------------------- commands


def cmd_table1(cfg: RunConfig, out: Output) -> int:
    ref = presets.reference_values()
    scen = _scenarios(cfg)
    cells = table1(scen, ref, cfg.models, cfg.tol, _howie(cfg), _scheel(cfg))
    if cfg.format == "csv":
        out.add("table1.csv", cells_to_csv(cells))
        out.add("table1_layout.csv", table_layout_csv(cells, list(scen)))
    else:
        out.add("table1.json", cells_to_json(cells))
    if "zurek" in cfg.models and "gold_channel" in scen:
        out.add("gold_channel_zurek_family.csv", _bounce_family(scen["gold_channel"], ref))
    for c in cells:
        ratio = "" if c.ratio is None else f"{c.ratio:.3f}"
        print(f"{c.scenario:17s} {c.quantity:28s} {fmt(c.computed):>24s} ref {fmt(c.reference):>10s} "
              f"ratio {ratio:>8s} {c.status}{' (' + c.note + ')' if c.note else ''}")
    if any(c.status == "error" for c in cells):
        return EXIT_NUMERIC
    return EXIT_MISMATCH if any(c.status == "fail" for c in cells) else EXIT_OK


def _bounce_family(sc: Scenario, ref: Mapping) -> str:
    """Gold-channel Zurek loss with <z^-3> from bouncing rays, over z_min."""
    target = ref["table1"]["zurek_energy_loss_eV"]["values"]["gold_channel"]
    base = zurek_energy_loss(sc)
    rows = [("constant-height", fmt(sc.geometry.height), fmt(base), fmt(target), fmt(base / target), "")]
    for pt in zurek_bounce_family(sc, np.geomspace(1e-10, 1e-7, 7)):
        rows.append(("bounce-averaged", fmt(pt.z_min), fmt(pt.energy_loss), fmt(target),
                     fmt(pt.energy_loss / target), fmt(pt.effective_height)))
    return _csv(["family", "z_or_z_min_m", "energy_loss_eV", "reference_eV", "ratio", "effective_height_m"], rows)


def cmd_table2(cfg: RunConfig, out: Output) -> int:
    ref = presets.reference_values()
    scen = presets.all_presets(tabulated_corrections=False)
    if cfg.coherence_length is not None:
        scen = {k: s.with_changes(coherence_length=cfg.coherence_length) for k, s in scen.items()}
    cells = table2(scen, ref, cfg.tol)
    extra = []
    for row, name in ref["table2"]["rows"].items():
        g = geometric_corrections(scen[name])
        extra.append((row, g.beam_width_w, g.waist_w0))
    if cfg.format == "csv":
        out.add("table2.csv", cells_to_csv(cells))
        out.add("table2_widths.csv", _csv(["row", "beam_width_m", "waist_m"], extra))
    else:
        out.add("table2.json", cells_to_json(cells))
    for c in cells:
        print(f"{c.scenario:13s} {c.quantity} computed {fmt(c.computed)} ref {fmt(c.reference)} "
              f"ratio {c.ratio:.3f} {c.status}{' (' + c.note + ')' if c.note else ''}")
    return EXIT_MISMATCH if any(c.status == "fail" for c in cells) else EXIT_OK


def cmd_report(cfg: RunConfig, out: Output) -> int:
    scen = _scenarios(cfg)
    for name, sc in scen.items():
        reps = full_report(sc, cfg.models, _howie(cfg), _scheel(cfg))
        out.add(f"report_{name}.json", reports_to_json(reps))
        for r in reps:
            de = "" if r.energy_loss is None else f" dE {fmt(r.energy_loss)} eV"
            flag = " unphysical_loss" if r.unphysical_loss else ""
            print(f"{name} {r.model}: Rd {fmt(r.decoherence_amount)}{de}{flag}")
    return EXIT_OK


def cmd_deflect(cfg: RunConfig, out: Output) -> int:
    params, light = _rate_params(cfg)
    sweep = _one_sweep(cfg, "x", (-600e-6, 600e-6, 25))
    model = "1d" if cfg.light == "super" else "2d"
    mesh = default_mesh_1d(light, cells=cfg.cells) if model == "1d" else default_mesh_2d(light)
    scan = deflection_scan(params, light, sweep.values, model=model, method=cfg.method, mesh=mesh)
    rows = [(float(x), _finite(float(d)), s) for x, d, s in zip(scan.laser_positions, scan.deflection, scan.status)]
    if cfg.format == "csv":
        out.add("deflection_scan.csv", _csv(["laser_position_m", "deflection_m", "status"], rows))
    else:
        out.add("deflection_scan.json", _json([dict(zip(("laser_position_m", "deflection_m", "status"), r)) for r in rows]))
    if scan.charge is not None:
        ch = scan.charge
        out.add("charge.csv", _csv(["position_m", "charge_per_m"], list(zip(map(float, ch.x), map(float, ch.line_charge)))))
        out.add("charge.json", _json({
            "provenance": ch.provenance, "cell_width_m": ch.cell_width, "length_m": ch.length,
            "relative_permittivity": ch.relative_permittivity,
            "position_m": [float(v) for v in ch.x], "depth_m": [float(v) for v in ch.depth],
            "charge_per_m": [float(v) for v in ch.line_charge],
        }))
    for x, d, s in rows:
        print(f"{x:+.6e} {'' if d is None else f'{d:+.6e}'} {s}")
    return EXIT_NUMERIC if all(s != "ok" for s in scan.status) else EXIT_OK


def cmd_chop(cfg: RunConfig, out: Output) -> int:
    params, light = _rate_params(cfg)
    mesh = default_mesh_1d(light, cells=cfg.cells)
    summary = []
    for f in cfg.frequencies:
        r = chopped_response(params, light, f, mesh=mesh)
        out.add(f"chop_{f:g}Hz.csv", _csv(["time_s", "deflection_proxy"], [(float(t), float(p)) for t, p in r.series]))
        summary.append((float(f), r.open_proxy, r.close_proxy, r.amplitude, r.settled_cycles))
        print(f"{f:g} Hz open {r.open_proxy:.6g} close {r.close_proxy:.6g} amplitude {r.amplitude:.6g}")
    out.add("chop_summary.csv", _csv(["frequency_hz", "open_proxy", "close_proxy", "amplitude", "settle_cycles"], summary))
    return EXIT_OK


def cmd_diffract(cfg: RunConfig, out: Output) -> int:
    beam = presets.preset("gaas_illuminated").beam
    summary = []
    for rd in cfg.rd:
        p = diffraction_pattern(beam, rd)
        out.add(f"pattern_rd{rd:g}.csv", _csv(["detector_position_m", "intensity"],
                                               list(zip(map(float, p.x), map(float, p.intensity)))))
        summary.append((float(rd), p.peak_metrics["contrast"], p.peak_metrics["central_fwhm"]))
        print(f"rd {rd:g} contrast {p.peak_metrics['contrast']:.6f} fwhm {p.peak_metrics['central_fwhm']:.6e} m")
    out.add("diffraction_summary.csv", _csv(["rd", "contrast", "central_fwhm_m"], summary))
    return EXIT_OK


def cmd_gap(cfg: RunConfig, out: Output) -> int:
    geom = GapGeometry(survival=cfg.survival)
    sweep = _one_sweep(cfg, "tilt", (-2e-3, 2e-3, 21))
    rows = []
    for t in sweep.values:
        r = gap_transmission(geom, t, rays=201)
        rows.append((t, r.transmission, _finite(r.mean_reflections), _finite(r.mean_height), _finite(r.tof)))
        print(f"tilt {t:+.4e} transmission {r.transmission:.4f} reflections {r.mean_reflections:.3f}")
    out.add("gap_scan.csv", _csv(["tilt_rad", "transmission", "mean_reflections", "mean_height_m", "tof_s"], rows))
    return EXIT_OK


def _one_sweep(cfg: RunConfig, name: str, default: tuple[float, float, int]) -> Sweep:
    if not cfg.sweep:
        lo, hi, n = default
        return Sweep(name, tuple(float(v) for v in np.linspace(lo, hi, n)))
    if len(cfg.sweep) != 1:
        raise ConfigError("this command takes a single --sweep")
    sw = parse_sweep(cfg.sweep[0])
    if sw.name != name:
        raise ConfigError(f"this command sweeps {name!r}, not {sw.name!r}")
    return sw


_SCENARIO_KNOBS = ("height", "interaction_length", "resistivity", "temperature", "coherence_length")


def cmd_sweep(cfg: RunConfig, out: Output) -> int:
    """Decoherence amounts over one scenario field, per model."""
    if len(cfg.sweep) != 1:
        raise ConfigError("sweep needs exactly one --sweep param=lo:hi:n")
    sw = parse_sweep(cfg.sweep[0])
    if sw.name not in _SCENARIO_KNOBS:
        raise ConfigError(f"sweep parameter must be one of {', '.join(_SCENARIO_KNOBS)}")
    scen = _scenarios(cfg)
    rows = []
    failures = 0
    for name, sc in scen.items():
        for v in sw.values:
            s2 = sc.with_changes(**{sw.name: v})
            for r in _safe_reports(s2, cfg):
                if isinstance(r, str):
                    failures += 1
                    rows.append((name, v, "", "", r))
                else:
                    rows.append((name, v, r.model, r.decoherence_amount, ""))
    out.add(f"sweep_{sw.name}.csv", _csv(["scenario", sw.name, "model", "decoherence_amount", "error"], rows))
    print(f"{len(rows)} points, {failures} failures")
    return EXIT_NUMERIC if failures and failures == len(rows) else EXIT_OK


def _safe_reports(sc: Scenario, cfg: RunConfig) -> list:
    out: list = []
    for m in cfg.models:
        try:
            out += full_report(sc, (m,), _howie(cfg), _scheel(cfg))
        except (QuadratureError, ArithmeticError, DomainError) as exc:
            out.append(f"{m}: {exc}")
    return out


def cmd_sensitivity(cfg: RunConfig, out: Output) -> int:
    """Howie P over cutoff and alpha, plus the gold-channel z_min family."""
    ref = presets.reference_values()
    scen = _scenarios(cfg)
    hs = _howie(cfg)
    factors = (0.1, 0.3, 1.0, 3.0, 10.0)
    alphas = (1 / 16, 1 / 8, 1 / 4, 1 / 2)
    rows = []
    failures = 0
    for name, sc in scen.items():
        c2 = sc.corrections[1] if sc.corrections else geometric_corrections(sc).c2
        for f in factors:
            for a in alphas:
                try:
                    p = howie_thermal_p(sc, hs.cutoff * f, a, c2, hs)
                    rows.append((name, hs.cutoff * f, a, p, ""))
                except (QuadratureError, ArithmeticError) as exc:
                    failures += 1
                    rows.append((name, hs.cutoff * f, a, "", str(exc)))
    out.add("sensitivity_howie.csv", _csv(["scenario", "cutoff_rad_per_s", "alpha", "howie_p", "error"], rows))
    if "gold_channel" in scen:
        out.add("sensitivity_zmin.csv", _bounce_family(scen["gold_channel"], ref))
    print(f"{len(rows)} Howie points, {failures} failures")
    return EXIT_OK


HANDLERS: dict[str, Callable[[RunConfig, Output], int]] = {
    "table1": cmd_table1,
    "table2": cmd_table2,
    "report": cmd_report,
    "deflect": cmd_deflect,
    "chop": cmd_chop,
    "diffract": cmd_diffract,
    "gap": cmd_gap,
    "sweep": cmd_sweep,
    "sensitivity": cmd_sensitivity,
}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wallcoherence", description="Electron-wall decoherence and wall-charging models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", action="append", default=[], help="preset name or scenario JSON path (repeatable)")
    p.add_argument("--models", default=",".join(MODELS), help="comma-separated subset of zurek,howie,scheel")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--tol", type=float, default=None, help="override acceptance tolerance (relative)")
    p.add_argument("--quad-tol", type=float, default=None, help="quadrature relative tolerance")
    p.add_argument("--sweep", action="append", default=[], help="param=lo:hi:n[:log]")
    p.add_argument("--config", default=None, help="JSON file with the same settings (strict keys)")
    p.add_argument("--params", default=None, help="JSON with 'rates' and 'illumination' sections")
    p.add_argument("--light", default="super", choices=("super", "sub"))
    p.add_argument("--frequencies", type=_floats, default=None, help="chop frequencies in Hz, comma-separated")
    p.add_argument("--rd", type=_floats, default=None, help="decoherence amounts, comma-separated")
    p.add_argument("--survival", type=float, default=None, help="per-bounce survival in the gap trace")
    p.add_argument("--coherence-length", type=float, default=None, help="override the coherence length (m)")
    p.add_argument("--method", default=None, choices=("approx", "trace"))
    p.add_argument("--cells", type=int, default=None, help="1D mesh cells")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {ns.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{ns.config}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        cfg = config_from_mapping(data, cfg)
    kw: dict[str, Any] = {}
    if ns.scenario:
        kw["scenarios"] = tuple(ns.scenario)
    if ns.models != ",".join(MODELS):
        kw["models"] = tuple(m.strip() for m in ns.models.split(",") if m.strip())
    if ns.out != ".":
        kw["out"] = ns.out
    if ns.format != "csv":
        kw["format"] = ns.format
    for name in ("tol", "quad_tol", "params", "frequencies", "rd", "survival", "coherence_length", "method", "cells"):
        v = getattr(ns, name)
        if v is not None:
            kw[name] = v
    if ns.sweep:
        kw["sweep"] = tuple(ns.sweep)
    if ns.light != "super":
        kw["light"] = ns.light
    return replace(cfg, **kw)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        out = Output(cfg.out)
        code = HANDLERS[cfg.command](cfg, out)
        out.write()
        return code
    except (ConfigError, ScenarioFormatError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
