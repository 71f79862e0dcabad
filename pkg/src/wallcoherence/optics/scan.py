"""Deflection versus laser position."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..carriers.model import ChargeDistribution
from ..carriers.params import IlluminationProfile, RateParameters
from ..carriers.solver import ConvergenceError, solve_steady_1d, solve_steady_2d
from ..core import DomainError
from .trajectory import DETECTOR_DISTANCE, traced_deflection, vertical_shift_approx


@dataclass(frozen=True)
class DeflectionScan:
    """Deflection (m, positive away from the surface) per laser centre.

    ``status`` holds "ok", "collision" or an error message per point; failed
    points carry NaN.
    """

    laser_positions: np.ndarray
    deflection: np.ndarray
    status: tuple[str, ...]
    charge: ChargeDistribution | None


def steady_charge(params: RateParameters, light: IlluminationProfile, model: str = "1d", mesh=None) -> ChargeDistribution:
    """Steady surface charge for a laser centred at x = 0."""
    centred = light.with_changes(center=0.0)
    if model == "1d":
        return solve_steady_1d(params, centred, mesh)[1]
    if model == "2d":
        return solve_steady_2d(params, centred, mesh)[1]
    raise DomainError("model must be '1d' or '2d'")


def deflection_scan(
    params: RateParameters,
    light: IlluminationProfile,
    laser_positions: Sequence[float],
    beam_x: float = 0.0,
    height: float = 12e-6,
    model: str = "1d",
    method: str = "approx",
    mesh=None,
    detector_distance: float = DETECTOR_DISTANCE,
) -> DeflectionScan:
    """Deflection of a beam at ``beam_x`` while the laser centre is scanned.

    The wall is uniform laterally, so the steady charge for a laser at x0 is
    the charge for a laser at 0 shifted by x0; it is solved once.  ``method``
    is "approx" (`vertical_shift_approx`) or "trace" (full tracing).
    """
    if method not in ("approx", "trace"):
        raise DomainError("method must be 'approx' or 'trace'")
    xs = np.asarray(laser_positions, dtype=float)
    try:
        base = steady_charge(params, light, model, mesh)
    except (ConvergenceError, ArithmeticError) as exc:
        msg = f"solver failure: {exc}"
        return DeflectionScan(xs, np.full(xs.size, np.nan), tuple(msg for _ in xs), None)
    out = np.empty(xs.size)
    status = []
    for i, x0 in enumerate(xs):
        ch = base.shifted(x0)
        if method == "approx":
            out[i] = vertical_shift_approx(ch, beam_x, height, detector_distance=detector_distance)
            status.append("ok")
        else:
            d = traced_deflection(ch, beam_x, height, detector_distance=detector_distance)
            out[i] = np.nan if d is None else d
            status.append("collision" if d is None else "ok")
    return DeflectionScan(xs, out, tuple(status), base)
