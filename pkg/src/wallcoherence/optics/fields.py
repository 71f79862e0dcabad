"""Electrostatic field and potential above a charged dielectric wall.

The wall fills ``z < 0``.  A charge ``q`` inside a half-space of permittivity
``eps_r`` produces in vacuum the field of a bare charge ``2 q / (1 + eps_r)``
at the same place, so every source below is scaled by that factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..carriers.model import ChargeDistribution
from ..core import CONST, DomainError

COULOMB_K = 1.0 / (4 * math.pi * CONST.vacuum_permittivity)


@dataclass(frozen=True, eq=False)
class PointCharges:
    """Point charges (C) at ``positions`` (M, 3) with ``z <= 0``."""

    positions: np.ndarray
    charges: np.ndarray
    relative_permittivity: float = 1.0

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float, copy=True).reshape(-1, 3)
        q = np.array(self.charges, dtype=float, copy=True).ravel()
        if pos.shape[0] != q.size:
            raise DomainError("positions and charges must have equal length")
        if np.any(pos[:, 2] > 0):
            raise DomainError("point charges must lie in the wall (z <= 0)")
        pos.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", q)


Sources = Union[ChargeDistribution, PointCharges]
FieldFunction = Callable[[np.ndarray], np.ndarray]


def _points(point) -> tuple[np.ndarray, bool]:
    p = np.asarray(point, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    if np.any(p[:, 2] <= 0):
        raise DomainError("field points must lie above the surface (z > 0)")
    return p, single


def _wall_factor(eps_r: float) -> float:
    return 2.0 / (1.0 + eps_r)


def field_from_charges(charge: Sources, point) -> np.ndarray:
    """Field (V/m) at ``point`` (3,) or points (M, 3).

    A `ChargeDistribution` is a set of uniform segments along y on
    ``[0, length]``; `PointCharges` are summed with Coulomb's law.
    """
    p, single = _points(point)
    if isinstance(charge, PointCharges):
        d = p[:, None, :] - charge.positions[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=2))
        e = COULOMB_K * _wall_factor(charge.relative_permittivity) * np.sum(
            (charge.charges / r**3)[:, :, None] * d, axis=1
        )
    else:
        e = _segment_field(charge, p)
    return e[0] if single else e


def _segment_field(charge: ChargeDistribution, p: np.ndarray) -> np.ndarray:
    lam = charge.line_charge * _wall_factor(charge.relative_permittivity) * COULOMB_K
    dx = p[:, 0:1] - charge.x[None, :]
    dz = p[:, 2:3] + charge.depth[None, :]
    rho2 = dx * dx + dz * dz
    a = p[:, 1:2]  # distance past the y = 0 end
    b = p[:, 1:2] - charge.length  # distance past the y = length end
    r_a = np.sqrt(rho2 + a * a)
    r_b = np.sqrt(rho2 + b * b)
    perp = lam * (a / r_a - b / r_b) / rho2
    ey = lam * (1.0 / r_b - 1.0 / r_a)
    return np.stack([np.sum(perp * dx, axis=1), np.sum(ey, axis=1), np.sum(perp * dz, axis=1)], axis=1)


def potential_from_charges(charge: Sources, point) -> np.ndarray | float:
    """Electrostatic potential (V), zero at infinity, consistent with `field_from_charges`."""
    p, single = _points(point)
    if isinstance(charge, PointCharges):
        d = p[:, None, :] - charge.positions[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=2))
        phi = COULOMB_K * _wall_factor(charge.relative_permittivity) * np.sum(charge.charges / r, axis=1)
    else:
        lam = charge.line_charge * _wall_factor(charge.relative_permittivity) * COULOMB_K
        dx = p[:, 0:1] - charge.x[None, :]
        dz = p[:, 2:3] + charge.depth[None, :]
        rho2 = dx * dx + dz * dz
        a = p[:, 1:2]
        b = p[:, 1:2] - charge.length
        # int_0^length dy / sqrt(rho^2 + (y_p - y)^2) = asinh(a/rho) - asinh(b/rho)
        rho = np.sqrt(rho2)
        phi = np.sum(lam * (np.arcsinh(a / rho) - np.arcsinh(b / rho)), axis=1)
    return float(phi[0]) if single else phi


def uniform_field(e: np.ndarray, y_range: tuple[float, float] | None = None) -> FieldFunction:
    """Constant field ``e`` (3,), optionally only for ``y`` inside ``y_range``."""
    e = np.asarray(e, dtype=float)

    def f(points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        out = np.broadcast_to(e, p.shape).copy()
        if y_range is not None:
            inside = (p[:, 1] >= y_range[0]) & (p[:, 1] <= y_range[1])
            out[~inside] = 0.0
        return out

    return f
