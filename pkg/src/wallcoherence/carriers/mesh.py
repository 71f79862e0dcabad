"""Finite-volume meshes and the in-plane Coulomb kernel.

Cells are infinitely long along ``y`` (the electron-beam direction), so every
cell carries a line charge (C/m) and the field is that of parallel lines in
the ``x``-depth plane.  Depth is measured downwards from the illuminated
surface at depth 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as sc

from ..core import DomainError


@dataclass(frozen=True, eq=False)
class Mesh:
    """Cell-centred mesh.

    Attributes
    ----------
    x, depth : ndarray
        Cell-centre coordinates (m).
    volume : ndarray
        Cell cross-section in the x-depth plane (m^2 per metre of y).
    face_a, face_b : ndarray of int
        Cells on either side of each interior face; flux is positive a -> b.
    face_distance, face_area : ndarray
        Centre-to-centre distance and face length (m).
    face_axis : ndarray of int
        0 for faces normal to x, 1 for faces normal to depth.
    softening : ndarray
        Per-cell kernel softening length (m).
    dims : int
        1 for the surface-layer model, 2 for the x-depth model.
    shape : tuple
        (nx,) or (nx, nz); flat index is ``ix * nz + iz``.
    """

    x: np.ndarray
    depth: np.ndarray
    volume: np.ndarray
    face_a: np.ndarray
    face_b: np.ndarray
    face_distance: np.ndarray
    face_area: np.ndarray
    face_axis: np.ndarray
    softening: np.ndarray
    dims: int
    shape: tuple

    @property
    def size(self) -> int:
        return int(self.x.size)

    @property
    def x_edges(self) -> np.ndarray:
        xs = np.unique(self.x)
        h = xs[1] - xs[0]
        return np.concatenate([xs - h / 2, [xs[-1] + h / 2]])

    def face_midpoints(self) -> tuple[np.ndarray, np.ndarray]:
        xa, xb = self.x[self.face_a], self.x[self.face_b]
        za, zb = self.depth[self.face_a], self.depth[self.face_b]
        return 0.5 * (xa + xb), 0.5 * (za + zb)


def mesh_1d(half_width: float, cells: int, layer_depth: float) -> Mesh:
    """Uniform strip ``[-half_width, half_width]`` of thickness ``layer_depth``."""
    if half_width <= 0 or layer_depth <= 0:
        raise DomainError("half_width and layer_depth must be positive")
    if cells < 3:
        raise DomainError("need at least 3 cells")
    h = 2 * half_width / cells
    x = -half_width + h * (np.arange(cells) + 0.5)
    a = np.arange(cells - 1)
    return Mesh(
        x=x,
        depth=np.full(cells, 0.0),
        volume=np.full(cells, h * layer_depth),
        face_a=a,
        face_b=a + 1,
        face_distance=np.full(cells - 1, h),
        face_area=np.full(cells - 1, layer_depth),
        face_axis=np.zeros(cells - 1, dtype=int),
        softening=np.full(cells, h),
        dims=1,
        shape=(cells,),
    )


def graded_depths(thickness: float, cells: int, first: float) -> np.ndarray:
    """Depth-cell edges growing geometrically from ``first`` at the surface."""
    if not 0 < first < thickness:
        raise DomainError("first cell must be thinner than the plate")
    if cells == 1:
        return np.array([0.0, thickness])
    # solve first * (r^cells - 1)/(r - 1) = thickness for r >= 1
    from scipy.optimize import brentq

    def total(r: float) -> float:
        return first * cells - thickness if r == 1 else first * (r**cells - 1) / (r - 1) - thickness

    if total(1.0) >= 0:
        return np.linspace(0.0, thickness, cells + 1)
    r = brentq(total, 1.0 + 1e-12, 10.0)
    widths = first * r ** np.arange(cells)
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    edges[-1] = thickness
    return edges


def mesh_2d(half_width: float, nx: int, depth_edges: np.ndarray) -> Mesh:
    """Tensor mesh: uniform in x, arbitrary depth edges (first edge 0)."""
    depth_edges = np.asarray(depth_edges, dtype=float)
    if depth_edges[0] != 0 or np.any(np.diff(depth_edges) <= 0):
        raise DomainError("depth edges must start at 0 and increase")
    nz = depth_edges.size - 1
    hx = 2 * half_width / nx
    xc = -half_width + hx * (np.arange(nx) + 0.5)
    hz = np.diff(depth_edges)
    zc = 0.5 * (depth_edges[:-1] + depth_edges[1:])
    X, Z = np.meshgrid(xc, zc, indexing="ij")
    HZ = np.broadcast_to(hz, (nx, nz))
    idx = np.arange(nx * nz).reshape(nx, nz)
    # x-normal faces
    ax, bx = idx[:-1, :].ravel(), idx[1:, :].ravel()
    areas_x = HZ[:-1, :].ravel()
    dist_x = np.full(ax.size, hx)
    # depth-normal faces
    az, bz = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    dist_z = np.broadcast_to(0.5 * (hz[:-1] + hz[1:]), (nx, nz - 1)).ravel()
    areas_z = np.full(az.size, hx)
    return Mesh(
        x=X.ravel(),
        depth=Z.ravel(),
        volume=(hx * HZ).ravel(),
        face_a=np.concatenate([ax, az]),
        face_b=np.concatenate([bx, bz]),
        face_distance=np.concatenate([dist_x, dist_z]),
        face_area=np.concatenate([areas_x, areas_z]),
        face_axis=np.concatenate([np.zeros(ax.size, int), np.ones(az.size, int)]),
        softening=(0.5 * np.hypot(hx, HZ)).ravel(),
        dims=2,
        shape=(nx, nz),
    )


def line_kernel(
    px: np.ndarray,
    pz: np.ndarray,
    mesh: Mesh,
    relative_permittivity: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Field per unit line charge at points ``(px, pz)`` from every cell.

    Returns ``(Kx, Kz)`` of shape (points, cells) so that
    ``E_x = Kx @ lambda``.  The wall fills depth > 0 and vacuum lies above.
    On the 1D strip the charges sit at the interface and the medium acts as
    the mean permittivity ``(1 + eps_r)/2``; in 2D each line has an image of
    strength ``(eps_r - 1)/(eps_r + 1)`` mirrored across the surface.
    Kz is the component along increasing depth.
    """
    px = np.asarray(px, float)[:, None]
    pz = np.asarray(pz, float)[:, None]
    s2 = mesh.softening[None, :] ** 2
    dx = px - mesh.x[None, :]
    eps0 = sc.epsilon_0
    if mesh.dims == 1:
        k = 1.0 / (2 * np.pi * eps0 * 0.5 * (1 + relative_permittivity))
        kx = k * dx / (dx * dx + s2)
        return kx, np.zeros_like(kx)
    k = 1.0 / (2 * np.pi * eps0 * relative_permittivity)
    g = (relative_permittivity - 1) / (relative_permittivity + 1)
    dz = pz - mesh.depth[None, :]
    dzi = pz + mesh.depth[None, :]
    r2 = dx * dx + dz * dz + s2
    r2i = dx * dx + dzi * dzi + s2
    kx = k * (dx / r2 + g * dx / r2i)
    kz = k * (dz / r2 + g * dzi / r2i)
    return kx, kz


def face_kernel(mesh: Mesh, relative_permittivity: float) -> np.ndarray:
    """Field component along each face normal (a -> b) per unit line charge."""
    fx, fz = mesh.face_midpoints()
    kx, kz = line_kernel(fx, fz, mesh, relative_permittivity)
    return np.where(mesh.face_axis[:, None] == 0, kx, kz)
