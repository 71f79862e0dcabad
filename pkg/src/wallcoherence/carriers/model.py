"""Carrier state, rate terms, currents and the discretised right-hand side.

Particle balance per cell (electrons n, holes p, trapped electrons n_t)::

    dn/dt  = div(flux_n) + g_th + g_opt + g_tn - r_np - r_nt
    dp/dt  = div(flux_p) + g_th + g_opt - r_np
    dn_t/dt = r_nt - g_tn

with ``r_np = c_np n p``, ``g_th = c_np n0 p0``, ``r_nt = c_nt n (N_t - n_t)``
and ``g_tn = (e_tn + sigma_opt F(x)) n_t``.  Holes receive no trap terms so
that every reaction conserves charge.  Fluxes are Scharfetter-Gummel on the
faces of a `Mesh`; the field comes from the nonlocal line-charge kernel.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc
from scipy import sparse

from ..core import DomainError
from .mesh import Mesh, face_kernel, line_kernel
from .params import IlluminationProfile, RateParameters

E = sc.e
KT_300 = sc.k * 300.0 / sc.e


@dataclass(frozen=True, eq=False)
class CarrierState:
    """Snapshot of the carrier densities (m^-3) on a mesh.

    ``field`` holds the in-plane field at the cell centres (V/m); shape (N,)
    for 1D meshes and (N, 2) (x, depth components) for 2D meshes.
    ``clamp_events`` counts negative densities reset to zero by the explicit
    stepper.
    """

    mesh: Mesh
    n: np.ndarray
    p: np.ndarray
    n_t: np.ndarray
    field: np.ndarray
    time: float = 0.0
    clamp_events: int = 0

    def __post_init__(self) -> None:
        for name in ("n", "p", "n_t", "field"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class ChargeDistribution:
    """Line charges (C per metre along y) of a set of cells.

    Each entry is a strip parallel to the beam that extends over
    ``0 <= y <= length``.  ``x`` and ``depth`` are strip positions (m).
    """

    x: np.ndarray
    depth: np.ndarray
    line_charge: np.ndarray
    cell_width: float
    length: float = 0.01
    relative_permittivity: float = 12.9
    provenance: str = ""
    generated_charge: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("x", "depth", "line_charge"):
            arr = np.array(getattr(self, name), dtype=float, copy=True).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.x.size == self.depth.size == self.line_charge.size):
            raise DomainError("x, depth and line_charge must have equal length")
        if np.any(self.depth < 0):
            raise DomainError("charges must lie at or below the surface")

    @property
    def total(self) -> float:
        return float(np.sum(self.line_charge))

    @property
    def surface_density(self) -> np.ndarray:
        """Areal density (C/m^2) when every strip has width ``cell_width``."""
        return self.line_charge / self.cell_width

    def scaled(self, factor: float) -> "ChargeDistribution":
        return ChargeDistribution(
            self.x, self.depth, factor * self.line_charge, self.cell_width, self.length,
            self.relative_permittivity, self.provenance, factor * self.generated_charge,
            dict(self.metadata),
        )

    def shifted(self, dx: float) -> "ChargeDistribution":
        return ChargeDistribution(
            self.x + dx, self.depth, self.line_charge, self.cell_width, self.length,
            self.relative_permittivity, self.provenance, self.generated_charge,
            dict(self.metadata),
        )

    def project_surface(self, window: float | None = None) -> "ChargeDistribution":
        """Sum each column within ``window`` of the surface onto depth 0."""
        keep = np.ones(self.x.size, bool) if window is None else self.depth <= window
        xs, inv = np.unique(self.x[keep], return_inverse=True)
        lam = np.bincount(inv, weights=self.line_charge[keep], minlength=xs.size)
        return ChargeDistribution(
            xs, np.zeros_like(xs), lam, self.cell_width, self.length,
            self.relative_permittivity, self.provenance + f"|surface<= {window}",
            self.generated_charge, dict(self.metadata),
        )


@dataclass(frozen=True)
class GenerationRates:
    """Volumetric generation rates per cell (m^-3 s^-1)."""

    thermal: np.ndarray
    optical: np.ndarray
    trap_thermal: np.ndarray
    trap_optical: np.ndarray


@dataclass(frozen=True)
class RecombinationRates:
    """Volumetric recombination rates per cell (m^-3 s^-1)."""

    band: np.ndarray
    trap_capture: np.ndarray


def optical_generation(mesh: Mesh, params: RateParameters, light: IlluminationProfile) -> np.ndarray:
    """Pair generation per cell volume (m^-3 s^-1).

    1D: the absorbed flux is spread uniformly over the strip thickness.
    2D: Beer-Lambert absorption averaged over each depth cell.
    """
    lateral = params.absorbed_flux * light.lateral(mesh.x)
    if mesh.dims == 1:
        return lateral / layer_depth(mesh)
    # cell-averaged exp(-z/L)/L over [z0, z1]
    hz = mesh.volume / _hx(mesh)
    z0 = mesh.depth - hz / 2
    z1 = mesh.depth + hz / 2
    L = light.penetration_depth
    frac = (np.exp(-z0 / L) - np.exp(-z1 / L)) / hz
    return lateral * frac


def _hx(mesh: Mesh) -> float:
    xs = np.unique(mesh.x)
    return float(xs[1] - xs[0]) if xs.size > 1 else float(mesh.volume[0])


def layer_depth(mesh: Mesh) -> float:
    """Strip thickness of a 1D mesh."""
    if mesh.dims != 1:
        raise DomainError("layer depth is defined for 1D meshes only")
    return float(mesh.face_area[0]) if mesh.face_area.size else float(mesh.volume[0])


def generation_terms(
    state: CarrierState, params: RateParameters, light: IlluminationProfile
) -> GenerationRates:
    """Thermal and optical generation into the conduction band."""
    m = state.mesh
    thermal = np.full(m.size, params.c_np * params.n0 * params.p0)
    optical = optical_generation(m, params, light)
    local_flux = params.photon_flux * light.lateral(m.x)
    return GenerationRates(
        thermal=thermal,
        optical=optical,
        trap_thermal=params.e_tn * state.n_t,
        trap_optical=params.sigma_opt * local_flux * state.n_t,
    )


def recombination_terms(state: CarrierState, params: RateParameters) -> RecombinationRates:
    """Band-to-band and trap-capture recombination; empty traps = N_t - n_t."""
    empty = np.maximum(params.trap_density - state.n_t, 0.0)
    return RecombinationRates(
        band=params.c_np * state.n * state.p,
        trap_capture=params.c_nt * state.n * empty,
    )


def currents_1d(state: CarrierState, params: RateParameters) -> tuple[np.ndarray, np.ndarray]:
    """Node currents J_n, J_p (A/m^2) from centred differences.

    ``J_n = e mu_n n E + e D_n dn/dx`` and ``J_p = e mu_p p E - e D_p dp/dx``;
    one-sided differences at the two end nodes.
    """
    if state.mesh.dims != 1:
        raise DomainError("currents_1d needs a 1D mesh")
    x = state.mesh.x
    dn = np.gradient(state.n, x, edge_order=2)
    dp = np.gradient(state.p, x, edge_order=2)
    jn = E * params.mu_n * state.n * state.field + E * params.d_n * dn
    jp = E * params.mu_p * state.p * state.field - E * params.d_p * dp
    return jn, jp


def net_density(n: np.ndarray, p: np.ndarray, n_t: np.ndarray, background: float) -> np.ndarray:
    """Net positive carrier density (m^-3) including the fixed background."""
    return p - n - n_t + background


def self_consistent_field(
    charge: ChargeDistribution | np.ndarray,
    mesh: Mesh,
    relative_permittivity: float = 12.9,
) -> np.ndarray:
    """In-plane field at the cell centres from line charges on the mesh.

    ``charge`` is either a `ChargeDistribution` on the mesh cells or a plain
    array of line charges (C/m).  Uses the softened kernel of `line_kernel`
    (softening one cell), so a cell exerts no force on itself.
    """
    lam = charge.line_charge if isinstance(charge, ChargeDistribution) else np.asarray(charge, float)
    if lam.size != mesh.size:
        raise DomainError("charge does not match mesh")
    kx, kz = line_kernel(mesh.x, mesh.depth, mesh, relative_permittivity)
    if mesh.dims == 1:
        return kx @ lam
    return np.stack([kx @ lam, kz @ lam], axis=1)


def bernoulli(x: np.ndarray) -> np.ndarray:
    """B(x) = x / (exp(x) - 1), with B(0) = 1."""
    x = np.asarray(x, float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = 1 - xs / 2 + xs * xs / 12
    xl = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = xl / np.expm1(xl)
    return out


def bernoulli_prime(x: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """dB/dx = B(x) (1 - B(-x)) / x."""
    x = np.asarray(x, float)
    if b is None:
        b = bernoulli(x)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = -0.5 + xs / 6
    xl = x[~small]
    out[~small] = b[~small] * (1 - bernoulli(-xl)) / xl
    return out


class CarrierSystem:
    """Discretised right-hand side and analytic Jacobian on a fixed mesh.

    Unknowns are stacked ``[n, p, n_t]`` (1D with traps) or ``[n, p]``.
    The fixed background density neutralises the dark equilibrium so that
    ``(n0, p0, n_t_eq)`` carries no charge.
    """

    def __init__(
        self,
        mesh: Mesh,
        params: RateParameters,
        light: IlluminationProfile,
        traps: bool = True,
    ) -> None:
        self.mesh = mesh
        self.params = params
        self.traps = traps
        self.species = 3 if traps else 2
        N = mesh.size
        self.N = N
        self.n_t_eq = params.trap_equilibrium if traps else 0.0
        self.background = params.n0 - params.p0 + self.n_t_eq
        self.kernel = face_kernel(mesh, params.relative_permittivity)
        F = mesh.face_a.size
        rows = np.concatenate([mesh.face_a, mesh.face_b])
        cols = np.concatenate([np.arange(F), np.arange(F)])
        vals = np.concatenate(
            [-mesh.face_area / mesh.volume[mesh.face_a], mesh.face_area / mesh.volume[mesh.face_b]]
        )
        self.div = sparse.csr_matrix((vals, (rows, cols)), shape=(N, F))
        # surface cells for the 2D pair-removal sink
        if mesh.dims == 2:
            top = mesh.depth == mesh.depth.min()
            hz = mesh.volume / _hx(mesh)
            self.surface_rate = np.where(top, params.surface_recombination_velocity / hz, 0.0)
        else:
            self.surface_rate = np.zeros(N)
        self.set_light(light)

    def set_light(self, light: IlluminationProfile) -> None:
        self.light = light
        m, p = self.mesh, self.params
        self.g_opt = optical_generation(m, p, light)
        self.detrap = p.e_tn + p.sigma_opt * p.photon_flux * light.lateral(m.x)

    # -- state packing -------------------------------------------------
    def pack(self, n, p, n_t=None) -> np.ndarray:
        parts = [n, p] + ([n_t] if self.traps else [])
        return np.concatenate(parts)

    def unpack(self, u: np.ndarray):
        N = self.N
        n, p = u[:N], u[N : 2 * N]
        n_t = u[2 * N :] if self.traps else np.zeros(N)
        return n, p, n_t

    def dark_state(self) -> np.ndarray:
        N = self.N
        return self.pack(np.full(N, self.params.n0), np.full(N, self.params.p0), np.full(N, self.n_t_eq))

    @functools.cached_property
    def charge_weights(self) -> np.ndarray:
        """Row vector c with ``c @ u`` = total charge minus the background (C/m)."""
        v = E * self.mesh.volume
        parts = [-v, v] + ([-v] if self.traps else [])
        return np.concatenate(parts)

    def line_charge(self, u: np.ndarray) -> np.ndarray:
        n, p, n_t = self.unpack(u)
        return E * self.mesh.volume * net_density(n, p, n_t, self.background)

    def conserved(self, u: np.ndarray) -> float:
        """Total charge per metre of y (C/m)."""
        return float(np.sum(self.line_charge(u)))

    def node_field(self, u: np.ndarray) -> np.ndarray:
        return self_consistent_field(self.line_charge(u), self.mesh, self.params.relative_permittivity)

    # -- right-hand side -----------------------------------------------
    def _fluxes(self, c: np.ndarray, efield: np.ndarray, sign: int, mu: float, D: float, jac: bool):
        m = self.mesh
        ca, cb = c[m.face_a], c[m.face_b]
        delta = m.face_distance
        if D == 0:
            raise DomainError("diffusion coefficients must be positive")
        P = sign * mu * efield * delta / D
        bp = bernoulli(P)
        bm = bernoulli(-P)
        flux = (D / delta) * (bm * ca - bp * cb)
        if not jac:
            return flux, None
        dca = (D / delta) * bm
        dcb = -(D / delta) * bp
        dE = sign * mu * (-bernoulli_prime(-P, bm) * ca - bernoulli_prime(P, bp) * cb)
        return flux, (dca, dcb, dE)

    def rhs(self, u: np.ndarray, jac: bool = False):
        """Time derivative of the stacked unknowns, optionally with Jacobian."""
        prm, m, N = self.params, self.mesh, self.N
        n, p, n_t = self.unpack(u)
        lam = self.line_charge(u)
        efield = self.kernel @ lam
        fn, dn_parts = self._fluxes(n, efield, -1, prm.mu_n, prm.d_n, jac)
        fp, dp_parts = self._fluxes(p, efield, +1, prm.mu_p, prm.d_p, jac)
        g_th = prm.c_np * prm.n0 * prm.p0
        r_np = prm.c_np * n * p
        ni = np.sqrt(prm.n0 * prm.p0)
        denom = n + p + 2 * ni
        surf = self.surface_rate * (n * p - ni * ni) / denom
        dn = self.div @ fn + g_th + self.g_opt - r_np - surf
        dp = self.div @ fp + g_th + self.g_opt - r_np - surf
        parts = [dn, dp]
        if self.traps:
            empty = prm.trap_density - n_t
            r_nt = prm.c_nt * n * empty
            g_tn = self.detrap * n_t
            dn = dn + g_tn - r_nt
            parts = [dn, dp, r_nt - g_tn]
        f = np.concatenate(parts)
        if not jac:
            return f
        S = self.species
        J = np.zeros((S * N, S * N))
        # field coupling: dE_f/dq_j = K_fj e V_j with q = p - n - n_t
        KM = self.kernel * (E * m.volume)[None, :]
        for k, (parts_k) in enumerate((dn_parts, dp_parts)):
            dca, dcb, dE = parts_k
            local = self.div @ sparse.csr_matrix(
                (
                    np.concatenate([dca, dcb]),
                    (np.concatenate([np.arange(dca.size)] * 2), np.concatenate([m.face_a, m.face_b])),
                ),
                shape=(dca.size, N),
            )
            block = self.div @ (dE[:, None] * KM)
            r0 = k * N
            J[r0 : r0 + N, r0 : r0 + N] += local.toarray()
            J[r0 : r0 + N, N : 2 * N] += block
            J[r0 : r0 + N, 0:N] -= block
            if self.traps:
                J[r0 : r0 + N, 2 * N :] -= block
        idx = np.arange(N)
        dsurf_dn = self.surface_rate * (p * denom - (n * p - ni * ni)) / denom**2
        dsurf_dp = self.surface_rate * (n * denom - (n * p - ni * ni)) / denom**2
        for r0 in (0, N):
            J[r0 + idx, idx] -= prm.c_np * p + dsurf_dn
            J[r0 + idx, N + idx] -= prm.c_np * n + dsurf_dp
        if self.traps:
            T = 2 * N
            J[idx, idx] -= prm.c_nt * empty
            J[idx, T + idx] += prm.c_nt * n + self.detrap
            J[T + idx, idx] += prm.c_nt * empty
            J[T + idx, T + idx] -= prm.c_nt * n + self.detrap
        return f, J
