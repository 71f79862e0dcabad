"""Time stepping, steady states and chopped illumination.

Two integrators share one discretisation (`CarrierSystem`):

* `step_1d` / `step_2d`: explicit Euler with a diffusion and drift stability
  bound, clamping and counting negative densities.  Simple and transparent,
  but the trap kinetics live on second time scales while the free carriers
  relax in nanoseconds, so reaching a steady state explicitly is out of
  reach.
* `integrate`: backward Euler with Newton iterations on the analytic
  Jacobian (including the nonlocal field coupling).  Every Newton update,
  damped or not, leaves the total charge unchanged, so neutrality holds to
  rounding at every step.  With a growing step it becomes pseudo-transient
  continuation, which is how the steady states are found.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc
from scipy import linalg

from ..core import DomainError
from .mesh import Mesh, graded_depths, mesh_1d, mesh_2d
from .model import CarrierState, CarrierSystem, ChargeDistribution, E
from .params import IlluminationProfile, RateParameters


class StabilityError(DomainError):
    """Explicit step larger than the stability bound; ``required_dt`` says how small."""

    def __init__(self, message: str, required_dt: float) -> None:
        super().__init__(message)
        self.required_dt = required_dt


class ConvergenceError(RuntimeError):
    """Steady-state or Newton iteration failed; ``history`` holds the residuals."""

    def __init__(self, message: str, history: list[float] | None = None) -> None:
        super().__init__(message)
        self.history = list(history or [])


SURFACE_WINDOW = 10e-6


@functools.lru_cache(maxsize=16)
def _system(mesh: Mesh, params: RateParameters, light: IlluminationProfile, traps: bool) -> CarrierSystem:
    return CarrierSystem(mesh, params, light, traps)


def system_for(mesh: Mesh, params: RateParameters, light: IlluminationProfile) -> CarrierSystem:
    """Cached discretisation; 1D meshes carry traps, 2D meshes do not."""
    return _system(mesh, params, light, mesh.dims == 1)


def state_from_vector(sys: CarrierSystem, u: np.ndarray, time: float, clamps: int = 0) -> CarrierState:
    n, p, n_t = sys.unpack(u)
    return CarrierState(sys.mesh, n, p, n_t, sys.node_field(u), time, clamps)


def vector_from_state(sys: CarrierSystem, state: CarrierState) -> np.ndarray:
    return sys.pack(state.n, state.p, state.n_t)


def dark_state(mesh: Mesh, params: RateParameters) -> CarrierState:
    """Field-free dark equilibrium (traps at their thermal occupancy)."""
    sys = system_for(mesh, params, IlluminationProfile(kind="off"))
    return state_from_vector(sys, sys.dark_state(), 0.0)


def charge_of(
    sys: CarrierSystem, u: np.ndarray, provenance: str, generated: float = 0.0, length: float = 0.01
) -> ChargeDistribution:
    m = sys.mesh
    hx = float(np.unique(m.x)[1] - np.unique(m.x)[0])
    return ChargeDistribution(
        x=m.x,
        depth=m.depth,
        line_charge=sys.line_charge(u),
        cell_width=hx,
        length=length,
        relative_permittivity=sys.params.relative_permittivity,
        provenance=provenance,
        generated_charge=generated,
    )


# ---------------------------------------------------------------- explicit


def stable_dt(sys: CarrierSystem, u: np.ndarray) -> float:
    """Largest explicit step allowed.

    Bounds: 0.4 h^2/D_max, a 0.4 drift Courant number and 0.4 over the
    fastest per-carrier loss rate of the reactions, which keeps the
    densities positive so no clamping (and no charge change) occurs.
    """
    prm = sys.params
    h = float(np.min(sys.mesh.face_distance))
    dt = 0.4 * h * h / max(prm.d_n, prm.d_p)
    n, p, n_t = sys.unpack(u)
    loss = prm.c_np * np.maximum(n, p)
    if sys.traps:
        loss = np.maximum(loss + prm.c_nt * np.maximum(prm.trap_density - n_t, 0.0), sys.detrap + prm.c_nt * n)
    kmax = float(loss.max(initial=0.0)) + float(sys.surface_rate.max(initial=0.0))
    if kmax > 0:
        dt = min(dt, 0.4 / kmax)
    efield = np.abs(sys.kernel @ sys.line_charge(u))
    vmax = max(prm.mu_n, prm.mu_p) * float(efield.max(initial=0.0))
    if vmax > 0:
        dt = min(dt, 0.4 * h / vmax)
    return dt


def _explicit(state: CarrierState, params: RateParameters, light: IlluminationProfile, dt: float) -> CarrierState:
    sys = system_for(state.mesh, params, light)
    u = vector_from_state(sys, state)
    limit = stable_dt(sys, u)
    if dt > limit:
        raise StabilityError(f"dt={dt:.3e} s exceeds the stability bound {limit:.3e} s", limit)
    new = u + dt * sys.rhs(u)
    clamps = int(np.count_nonzero(new < 0))
    new = np.maximum(new, 0.0)
    if sys.traps:
        over = new[2 * sys.N :] > params.trap_density
        clamps += int(np.count_nonzero(over))
        new[2 * sys.N :][over] = params.trap_density
    return state_from_vector(sys, new, state.time + dt, state.clamp_events + clamps)


def step_1d(state: CarrierState, params: RateParameters, light: IlluminationProfile, dt: float) -> CarrierState:
    """One explicit Euler step of the surface-layer model with traps.

    Raises
    ------
    StabilityError
        If ``dt`` exceeds `stable_dt`; the exception carries the bound.
    """
    if state.mesh.dims != 1:
        raise DomainError("step_1d needs a 1D mesh")
    return _explicit(state, params, light, dt)


def step_2d(state: CarrierState, params: RateParameters, light: IlluminationProfile, dt: float) -> CarrierState:
    """One explicit Euler step of the trap-free x-depth model."""
    if state.mesh.dims != 2:
        raise DomainError("step_2d needs a 2D mesh")
    return _explicit(state, params, light, dt)


# ---------------------------------------------------------------- implicit


@dataclass
class IntegrationLog:
    steps: int = 0
    newton_iterations: int = 0
    rejected: int = 0
    max_charge_drift: float = 0.0
    last_dt: float = 0.0
    residuals: list = field(default_factory=list)


def _species_floor(sys: CarrierSystem, u: np.ndarray, rel: float) -> np.ndarray:
    N = sys.N
    peaks = np.abs(u).reshape(sys.species, N).max(axis=1)
    return np.repeat(rel * peaks + 1.0, N)


def _newton_be(sys: CarrierSystem, u_old: np.ndarray, dt: float, tol: float = 1e-7, maxit: int = 15):
    """Solve ``u - u_old = dt f(u)``; returns (u, iterations) or (None, it).

    Convergence is judged per species against 1e-6 of that species' peak,
    because the far-field densities sit at the conditioning noise floor.
    """
    u = u_old.copy()
    nt_slice = slice(2 * sys.N, None) if sys.traps else None
    cap = sys.params.trap_density
    floor = _species_floor(sys, u_old, 1e-6)
    q_old = sys.charge_weights @ u_old
    for it in range(1, maxit + 1):
        f, J = sys.rhs(u, jac=True)
        G = u - u_old - dt * f
        s = np.abs(u) + floor
        A = np.eye(u.size) - dt * J
        A *= s[None, :]
        A /= s[:, None]
        try:
            y = linalg.solve(A, -G / s, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            return None, it
        delta = y * s
        if not np.all(np.isfinite(delta)):
            return None, it
        # remove the component that would change the total charge; exact
        # arithmetic gives zero, the solve leaves cond(A) * eps behind
        c = sys.charge_weights
        w = s * s * c
        delta -= w * ((c @ (u + delta) - q_old) / (c @ w))
        lam = 1.0
        neg = delta < 0
        if np.any(neg):
            lam = min(lam, 0.9 * float(np.min(u[neg] / -delta[neg])))
        if nt_slice is not None:
            d_t = delta[nt_slice]
            up = d_t > 0
            if np.any(up):
                room = cap - u[nt_slice][up]
                lam = min(lam, 0.9 * float(np.min(room / d_t[up])))
        if lam < 1e-4:
            return None, it
        u = u + lam * delta
        if lam == 1.0 and float(np.max(np.abs(delta) / s)) < tol:
            return u, it
    return None, maxit


def integrate(
    sys: CarrierSystem,
    u0: np.ndarray,
    t_end: float,
    dt0: float = 1e-12,
    dt_max: float | None = None,
    log: IntegrationLog | None = None,
) -> np.ndarray:
    """Backward-Euler march from 0 to ``t_end`` with adaptive steps."""
    log = log or IntegrationLog()
    q0 = sys.conserved(u0)
    scale = float(np.sum(np.abs(sys.line_charge(u0)))) + E * float(np.sum(sys.mesh.volume)) * sys.params.n0
    t, u, dt = 0.0, u0, dt0
    while t < t_end * (1 - 1e-12):
        h = min(dt, t_end - t)
        if dt_max is not None:
            h = min(h, dt_max)
        new, it = _newton_be(sys, u, h)
        log.newton_iterations += it
        if new is None:
            log.rejected += 1
            dt = h / 4
            if dt < 1e-18:
                raise ConvergenceError("time step underflow in implicit march", log.residuals)
            continue
        t += h
        u = new
        log.steps += 1
        drift = abs(sys.conserved(u) - q0) / max(scale, float(np.sum(np.abs(sys.line_charge(u)))))
        log.max_charge_drift = max(log.max_charge_drift, drift)
        dt = h * (4.0 if it <= 3 else 2.0 if it <= 6 else 1.0)
        log.last_dt = dt
    return u


def relative_rate(sys: CarrierSystem, u: np.ndarray) -> float:
    """Largest |f(u)| / |u| (1/s) with a per-species floor of 1e-6 of its peak.

    Diagnostic only: at a converged steady state this is set by rounding in
    the large, cancelling generation and flux terms.
    """
    f = sys.rhs(u)
    N = sys.N
    worst = 0.0
    for k in range(sys.species):
        sl = slice(k * N, (k + 1) * N)
        peak = float(np.max(np.abs(u[sl])))
        denom = np.abs(u[sl]) + 1e-6 * peak + 1e-30
        worst = max(worst, float(np.max(np.abs(f[sl]) / denom)))
    return worst


def steady_state(
    sys: CarrierSystem,
    u0: np.ndarray | None = None,
    rate_tol: float = 1e-6,
    max_steps: int = 400,
    log: IntegrationLog | None = None,
) -> np.ndarray:
    """Pseudo-transient continuation to a steady state.

    Stops once an accepted step changes every unknown by less than
    ``rate_tol * dt`` relative to its value (per-species floor 1e-6 of the
    peak), i.e. the relative change per unit time is below ``rate_tol``.
    """
    log = log or IntegrationLog()
    u = sys.dark_state() if u0 is None else u0.copy()
    q0 = sys.conserved(u)
    dt = 1e-12
    for _ in range(max_steps):
        new, it = _newton_be(sys, u, dt)
        log.newton_iterations += it
        if new is None:
            log.rejected += 1
            dt /= 4
            if dt < 1e-18:
                break
            continue
        floor = _species_floor(sys, new, 1e-6)
        r = float(np.max(np.abs(new - u) / (np.abs(new) + floor))) / dt
        u = new
        log.steps += 1
        scale = float(np.sum(np.abs(sys.line_charge(u)))) or 1.0
        log.max_charge_drift = max(log.max_charge_drift, abs(sys.conserved(u) - q0) / scale)
        log.residuals.append(r)
        if r < rate_tol:
            return u
        dt *= 4.0 if it <= 3 else 2.0 if it <= 6 else 1.0
        dt = min(dt, 1e12)
    raise ConvergenceError(
        f"steady state not reached in {max_steps} steps (last rate {log.residuals[-1] if log.residuals else float('nan'):.3e}/s)",
        log.residuals,
    )


@dataclass(frozen=True)
class SteadyResult:
    state: CarrierState
    charge: ChargeDistribution
    log: IntegrationLog


def default_mesh_1d(light: IlluminationProfile, cells: int = 120, widths: float = 6.0) -> Mesh:
    """Strip spanning ``2 * widths`` laser widths, centred on the laser."""
    return mesh_1d(widths * light.width, cells, light.penetration_depth)


def solve_steady_1d(
    params: RateParameters,
    light: IlluminationProfile,
    mesh: Mesh | None = None,
    rate_tol: float = 1e-6,
) -> tuple[CarrierState, ChargeDistribution]:
    """Steady state of the surface-layer model under constant illumination.

    Returns the state and the line charge ``e (p - n - n_t + background)``
    of every strip.  Raises `ConvergenceError` with the residual history if
    the step budget is exhausted.
    """
    res = solve_steady_1d_detailed(params, light, mesh, rate_tol)
    return res.state, res.charge


def solve_steady_1d_detailed(
    params: RateParameters,
    light: IlluminationProfile,
    mesh: Mesh | None = None,
    rate_tol: float = 1e-6,
) -> SteadyResult:
    mesh = mesh or default_mesh_1d(light)
    if mesh.dims != 1:
        raise DomainError("solve_steady_1d needs a 1D mesh")
    sys = system_for(mesh, params, light)
    log = IntegrationLog()
    u = steady_state(sys, rate_tol=rate_tol, log=log)
    st = state_from_vector(sys, u, math.inf)
    return SteadyResult(st, charge_of(sys, u, "steady-1d"), log)


def default_mesh_2d(
    light: IlluminationProfile,
    thickness: float = 300e-6,
    nx: int = 64,
    nz: int = 18,
    first: float = 1e-6,
) -> Mesh:
    """x-depth mesh spanning six widths of the broadest Gaussian."""
    widest = light.secondary_width if light.kind == "two-gaussian" else light.width
    return mesh_2d(3 * widest, nx, graded_depths(thickness, nz, first))


def solve_steady_2d(
    params: RateParameters,
    light: IlluminationProfile,
    mesh: Mesh | None = None,
    rate_tol: float = 1e-6,
    window: float = SURFACE_WINDOW,
) -> tuple[CarrierState, ChargeDistribution]:
    """Steady state of the trap-free x-depth model.

    The returned charge keeps only cells whose centres lie within
    ``window`` of the surface, summed per column onto the surface.
    """
    mesh = mesh or default_mesh_2d(light)
    if mesh.dims != 2:
        raise DomainError("solve_steady_2d needs a 2D mesh")
    sys = system_for(mesh, params, light)
    u = steady_state(sys, rate_tol=rate_tol)
    st = state_from_vector(sys, u, math.inf)
    full = charge_of(sys, u, "steady-2d")
    return st, full.project_surface(window)


# ---------------------------------------------------------------- chopping


def deflection_proxy(charge: ChargeDistribution, beam_x: float = 0.0, height: float = 12e-6) -> float:
    """Upward field felt by an electron (V/m): ``-E_z`` above the surface.

    Positive means the electron is pushed away from the wall.  Each strip is
    an infinite line charge at the interface, whose vacuum field is that of
    ``2/(1 + eps_r)`` times the bare charge.
    """
    dx = beam_x - charge.x
    dz = height + charge.depth
    k = 2.0 / (1 + charge.relative_permittivity) / (2 * np.pi * sc.epsilon_0)
    ez = k * np.sum(charge.line_charge * dz / (dx * dx + dz * dz))
    return float(-ez)


@dataclass(frozen=True)
class ChopSnapshot:
    time: float
    phase: str  # "open" (end of an illuminated half) or "close" (end of a dark half)
    charge: ChargeDistribution
    proxy: float


@dataclass(frozen=True)
class ChopResult:
    frequency: float
    snapshots: tuple
    series: tuple  # ((time_s, proxy), ...)
    settled_cycles: int

    @property
    def open_proxy(self) -> float:
        return [s.proxy for s in self.snapshots if s.phase == "open"][-1]

    @property
    def close_proxy(self) -> float:
        return [s.proxy for s in self.snapshots if s.phase == "close"][-1]

    @property
    def amplitude(self) -> float:
        return self.open_proxy - self.close_proxy


def chopped_response(
    params: RateParameters,
    light: IlluminationProfile,
    frequency: float,
    cycles: int = 2,
    mesh: Mesh | None = None,
    settle_tol: float = 1e-3,
    max_settle_cycles: int = 400,
    beam_height: float = 12e-6,
    samples_per_half: int = 8,
) -> ChopResult:
    """Square-wave illumination with equal open and closed halves.

    Starts from the steady state at half intensity (close to the periodic
    state), chops until the extrapolated drift of the chop-close proxy is
    below ``settle_tol`` (relative), then records ``cycles`` more cycles.
    Snapshots are taken at every open->close and close->open transition of
    the recorded cycles.
    """
    if not 1 <= frequency <= 1000:
        raise DomainError("frequency must lie in [1, 1000] Hz")
    if cycles < 1:
        raise DomainError("cycles must be >= 1")
    mesh = mesh or default_mesh_1d(light)
    on = system_for(mesh, params, light)
    off = system_for(mesh, params, light.with_changes(intensity=0.0))
    half = 0.5 / frequency
    # the periodic state sits close to the steady state at mean intensity
    mean = system_for(mesh, params, light.with_changes(intensity=0.5 * light.intensity))
    u = steady_state(mean)
    dt_max = half / samples_per_half

    def run_half(sys, u, t0, record):
        series = []
        t = t0
        log = IntegrationLog(last_dt=1e-10)
        for k in range(samples_per_half):
            u = integrate(sys, u, half / samples_per_half, dt0=log.last_dt, dt_max=dt_max, log=log)
            t += half / samples_per_half
            if record:
                series.append((t, deflection_proxy(charge_of(on, u, ""), 0.0, beam_height)))
        return u, series

    t = 0.0
    closes: list[float] = []
    settled = 0
    for settled in range(1, max_settle_cycles + 1):
        u, _ = run_half(on, u, t, False)
        u, _ = run_half(off, u, t, False)
        t += 2 * half
        closes.append(deflection_proxy(charge_of(on, u, ""), 0.0, beam_height))
        if len(closes) >= 3:
            d1, d2 = closes[-2] - closes[-3], closes[-1] - closes[-2]
            ratio = d2 / d1 if d1 != 0 else 0.0
            # geometric tail of the remaining drift
            tail = abs(d2) * ratio / (1 - ratio) if 0 <= ratio < 1 else math.inf
            if tail <= settle_tol * abs(closes[-1]) or d2 == 0:
                break
    snaps, series = [], []
    for _ in range(cycles):
        u, s = run_half(on, u, t, True)
        t += half
        ch = charge_of(on, u, f"chop {frequency:g} Hz open")
        snaps.append(ChopSnapshot(t, "open", ch, deflection_proxy(ch, 0.0, beam_height)))
        series += s
        u, s = run_half(off, u, t, True)
        t += half
        ch = charge_of(on, u, f"chop {frequency:g} Hz close")
        snaps.append(ChopSnapshot(t, "close", ch, deflection_proxy(ch, 0.0, beam_height)))
        series += s
    return ChopResult(frequency, tuple(snaps), tuple(series), settled)
