"""Geometric ray trace through a tapered gap with specular walls.

The gap is symmetric about its axis: the walls sit at ``+-h(s)/2`` with
``h(s) = entry - (entry - exit) s / length`` along the axis ``s``.  Rays enter
parallel at angle ``tilt`` to the axis, spread uniformly over the entry
opening.  Each wall bounce turns the ray by twice the angle between ray and
wall; a ray leaving through the entry is lost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import DomainError, _positive


@dataclass(frozen=True)
class GapGeometry:
    entry_gap: float = 15e-6
    exit_gap: float = 1e-6
    length: float = 15e-3
    survival: float = 1.0  # per-bounce survival probability

    def __post_init__(self) -> None:
        _positive("exit_gap", self.exit_gap)
        _positive("length", self.length)
        if not self.entry_gap > self.exit_gap:
            raise DomainError("entry_gap must exceed exit_gap")
        if not 0 <= self.survival <= 1:
            raise DomainError("survival must lie in [0, 1]")

    @property
    def wall_angle(self) -> float:
        """Half-angle of the taper (rad)."""
        return math.atan(0.5 * (self.entry_gap - self.exit_gap) / self.length)

    @property
    def straight_limit(self) -> float:
        """Largest tilt at which some ray passes without touching a wall."""
        return math.atan(0.5 * (self.entry_gap + self.exit_gap) / self.length)

    def half_gap(self, s):
        return 0.5 * (self.entry_gap - (self.entry_gap - self.exit_gap) * np.asarray(s) / self.length)


@dataclass(frozen=True)
class RayPath:
    """Vertices (s, y) of one ray; ``transmitted`` when it leaves at s = length."""

    s: np.ndarray
    y: np.ndarray
    reflections: int
    transmitted: bool


@dataclass(frozen=True)
class GapResult:
    """Bundle statistics.

    ``transmission`` weights each transmitted ray by ``survival**reflections``;
    the means are over transmitted rays (NaN if none).  ``mean_height`` is the
    path-averaged distance to the nearer wall and ``tof`` the mean path length
    divided by ``speed``.
    """

    tilt: float
    transmission: float
    mean_reflections: float
    mean_height: float
    tof: float
    rays: int


def trace_ray(geom: GapGeometry, y0: float, tilt: float, max_reflections: int = 10_000) -> RayPath:
    """Follow one ray entering at height ``y0`` (from the axis) with angle ``tilt``."""
    if abs(y0) > 0.5 * geom.entry_gap:
        raise DomainError("the ray must enter through the opening")
    beta = geom.wall_angle
    half0 = 0.5 * geom.entry_gap
    s, y, th = 0.0, float(y0), float(tilt)
    ss, ys = [s], [y]
    k = 0
    while True:
        c, t = math.cos(th), math.tan(th)
        if c <= 0:
            return RayPath(np.array(ss), np.array(ys), k, False)
        # upper wall y = half0 - tan(beta) s, lower wall y = -(half0 - tan(beta) s)
        tb = math.tan(beta)
        cand = []
        den_u = t + tb
        if den_u > 0:
            cand.append(((half0 - y - tb * s) / den_u, "upper"))
        den_l = t - tb
        if den_l < 0:
            cand.append(((-half0 - y + tb * s) / den_l, "lower"))
        hits = [(ds, w) for ds, w in cand if ds > 1e-18 * geom.length]
        ds, wall = min(hits) if hits else (math.inf, "")
        if s + ds >= geom.length:
            y_end = y + t * (geom.length - s)
            ss.append(geom.length)
            ys.append(y_end)
            return RayPath(np.array(ss), np.array(ys), k, True)
        s += ds
        y += t * ds
        ss.append(s)
        ys.append(y)
        k += 1
        th = (-2 * beta - th) if wall == "upper" else (2 * beta - th)
        if k >= max_reflections:
            return RayPath(np.array(ss), np.array(ys), k, False)


def _wall_distance(geom: GapGeometry, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    return geom.half_gap(s) - np.abs(y)


def path_length(path: RayPath) -> float:
    return float(np.sum(np.hypot(np.diff(path.s), np.diff(path.y))))


def _mean_distance(geom: GapGeometry, path: RayPath) -> float:
    # distance to the nearer wall is piecewise linear in s between vertices,
    # apart from axis crossings, so sample each leg finely and average
    tot, acc = 0.0, 0.0
    for s0, s1, y0, y1 in zip(path.s[:-1], path.s[1:], path.y[:-1], path.y[1:]):
        if s1 <= s0:
            continue
        u = np.linspace(0.0, 1.0, 65)
        d = _wall_distance(geom, s0 + u * (s1 - s0), y0 + u * (y1 - y0))
        w = (s1 - s0)
        acc += w * float(np.mean(0.5 * (d[1:] + d[:-1])))
        tot += w
    return acc / tot


def gap_transmission(
    geom: GapGeometry, tilt: float, rays: int = 401, speed: float = 0.01 / 4.1e-10
) -> GapResult:
    """Transmission of a parallel bundle at ``tilt`` (rad)."""
    if not abs(tilt) < 0.5:
        raise DomainError("|tilt| must be below 0.5 rad")
    if rays < 1:
        raise DomainError("need at least one ray")
    half0 = 0.5 * geom.entry_gap
    # cell-centred entry heights keep the bundle symmetric about the axis
    y0 = -half0 + (np.arange(rays) + 0.5) * geom.entry_gap / rays
    weight = 0.0
    refl, heights, lengths = [], [], []
    for y in y0:
        p = trace_ray(geom, float(y), tilt)
        if p.transmitted:
            weight += geom.survival ** p.reflections
            refl.append(p.reflections)
            heights.append(_mean_distance(geom, p))
            lengths.append(path_length(p))
    n_ok = len(refl)
    return GapResult(
        tilt=float(tilt),
        transmission=weight / rays,
        mean_reflections=math.fsum(refl) / n_ok if n_ok else math.nan,
        mean_height=math.fsum(heights) / n_ok if n_ok else math.nan,
        tof=(math.fsum(lengths) / n_ok) / speed if n_ok else math.nan,
        rays=rays,
    )


def transmission_scan(geom: GapGeometry, tilts, rays: int = 401) -> list[GapResult]:
    return [gap_transmission(geom, float(t), rays) for t in tilts]


# ---------------------------------------------------------------- <z^-3>


def segment_inverse_cube_integral(z0: float, z1: float, length: float, z_min: float) -> float:
    """Exact int z^-3 ds along a straight leg from height z0 to z1 with z clamped at ``z_min``."""
    if length <= 0:
        return 0.0
    if z_min <= 0:
        raise DomainError("z_min must be positive")
    a, b = max(z0, 0.0), max(z1, 0.0)
    if a > b:
        a, b = b, a
    if b - a <= 1e-15 * max(b, z_min):
        return length / max(a, z_min) ** 3
    slope = (b - a) / length  # dz/ds on the rising orientation
    total = 0.0
    if a < z_min:
        flat = (min(b, z_min) - a) / slope
        total += flat / z_min**3
        a = min(b, z_min)
    if b > a:
        total += (1.0 / a**2 - 1.0 / b**2) / (2 * slope)
    return total


def path_mean_inverse_cube(s, z, z_min: float) -> float:
    """Path average of max(z, z_min)^-3 for a polyline of heights ``z`` at positions ``s``."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    total, span = 0.0, 0.0
    for i in range(s.size - 1):
        ds = s[i + 1] - s[i]
        total += segment_inverse_cube_integral(z[i], z[i + 1], ds, z_min)
        span += ds
    if span <= 0:
        raise DomainError("the path has zero length")
    return total / span


@dataclass(frozen=True)
class BounceAverage:
    mean_inverse_cube: float
    effective_height: float
    z_min: float
    rays_used: int


def bounce_averaged_z3(geom: GapGeometry, tilt: float, z_min: float, rays: int = 201) -> BounceAverage:
    """Average of ``max(d, z_min)^-3`` over transmitted rays, ``d`` the distance to the nearer wall.

    Legs are split where the nearer wall changes (axis crossings), so each
    piece has a linear ``d`` and is integrated exactly.
    """
    if not z_min > 0:
        raise DomainError("an explicit z_min > 0 is required; <z^-3> diverges at the wall")
    half0 = 0.5 * geom.entry_gap
    y0 = -half0 + (np.arange(rays) + 0.5) * geom.entry_gap / rays
    vals = []
    for y in y0:
        p = trace_ray(geom, float(y), tilt)
        if not p.transmitted:
            continue
        s_pts, d_pts = _split_at_axis(geom, p)
        vals.append(path_mean_inverse_cube(s_pts, d_pts, z_min))
    if not vals:
        raise DomainError("no ray survives at this tilt")
    m = math.fsum(vals) / len(vals)
    return BounceAverage(m, m ** (-1.0 / 3.0), z_min, len(vals))


def _split_at_axis(geom: GapGeometry, p: RayPath) -> tuple[np.ndarray, np.ndarray]:
    s_out, y_out = [p.s[0]], [p.y[0]]
    for s0, s1, y0, y1 in zip(p.s[:-1], p.s[1:], p.y[:-1], p.y[1:]):
        if y0 * y1 < 0:
            sc = s0 + (s1 - s0) * y0 / (y0 - y1)
            s_out.append(sc)
            y_out.append(0.0)
        s_out.append(s1)
        y_out.append(y1)
    s = np.array(s_out)
    return s, _wall_distance(geom, s, np.array(y_out))
