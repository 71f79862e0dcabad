from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wallcoherence.carriers import solver as S
from wallcoherence.carriers.model import ChargeDistribution
from wallcoherence.carriers.params import SUPER_BANDGAP, RateParameters
from wallcoherence.core import CONST, BeamParameters, DomainError
from wallcoherence.optics.diffraction import (
    GratingSetup,
    central_fwhm,
    contrast,
    diffraction_pattern,
    pair_damping,
)
from wallcoherence.optics.fields import (
    COULOMB_K,
    PointCharges,
    field_from_charges,
    potential_from_charges,
    uniform_field,
)
from wallcoherence.optics.gap import (
    GapGeometry,
    bounce_averaged_z3,
    gap_transmission,
    path_mean_inverse_cube,
    segment_inverse_cube_integral,
    trace_ray,
)
from wallcoherence.optics.scan import deflection_scan
from wallcoherence.optics.trajectory import (
    ENTRY_MARGIN,
    SHIFT_CALIBRATION,
    TrajectoryState,
    beam_launch,
    calibrate_shift,
    leapfrog,
    propagate_electron,
    traced_deflection,
    vertical_shift_approx,
)

SPEED = 0.01 / 4.1e-10


@pytest.fixture(scope="module")
def steady_charge():
    return S.solve_steady_1d(RateParameters(), SUPER_BANDGAP)[1]


# ---------------------------------------------------------------- fields


def _segment_oracle(lam, x0, d, length, p):
    """Coulomb field of a uniform segment by direct quadrature."""

    rho = math.hypot(p[0] - x0, p[2] + d)
    floor = 1e-10 * lam * COULOMB_K / rho  # field scale of an infinite line

    def comp(i):
        def f(y):
            r = np.array([p[0] - x0, p[1] - y, p[2] + d])
            return lam * COULOMB_K * r[i] / np.linalg.norm(r) ** 3

        return integrate.quad(f, 0.0, length, epsabs=floor, epsrel=1e-10, limit=400,
                              points=[min(max(p[1], 0.0), length)])[0]

    return np.array([comp(i) for i in range(3)])


@pytest.mark.parametrize("point", [(0.0, 5e-3, 1e-5), (3e-5, -1e-3, 2e-6), (-1e-4, 1.2e-2, 4e-5)])
def test_segment_field_matches_quadrature(point):
    ch = ChargeDistribution([1e-5], [2e-6], [3e-12], 1e-6, length=0.01, relative_permittivity=1.0)
    got = field_from_charges(ch, np.array(point))
    ref = _segment_oracle(3e-12, 1e-5, 2e-6, 0.01, point)
    assert np.allclose(got, ref, rtol=1e-6, atol=1e-6 * np.linalg.norm(ref))


def test_wall_factor_applied():
    bare = ChargeDistribution([0.0], [0.0], [1e-12], 1e-6, relative_permittivity=1.0)
    wall = ChargeDistribution([0.0], [0.0], [1e-12], 1e-6, relative_permittivity=12.9)
    p = np.array([0.0, 5e-3, 1e-5])
    assert np.allclose(field_from_charges(wall, p), field_from_charges(bare, p) * 2 / 13.9, rtol=1e-14)


def test_point_charge_coulomb():
    pc = PointCharges([[0.0, 0.0, 0.0]], [1e-15])
    e = field_from_charges(pc, np.array([0.0, 0.0, 1e-3]))
    assert e[2] == pytest.approx(COULOMB_K * 1e-15 / 1e-6, rel=1e-14)
    assert potential_from_charges(pc, np.array([0.0, 0.0, 1e-3])) == pytest.approx(COULOMB_K * 1e-12, rel=1e-14)


@given(st.floats(-2e-4, 2e-4), st.floats(-2e-3, 1.2e-2), st.floats(2e-6, 1e-4))
@settings(max_examples=30)
def test_field_is_minus_potential_gradient(x, y, z, ):
    ch = ChargeDistribution([0.0, 5e-5], [0.0, 1e-6], [2e-12, -1e-12], 1e-6)
    p = np.array([x, y, z])
    h = 1e-4 * z
    grad = np.array([
        (potential_from_charges(ch, p + h * e) - potential_from_charges(ch, p - h * e)) / (2 * h)
        for e in np.eye(3)
    ])
    e_field = field_from_charges(ch, p)
    assert np.allclose(-grad, e_field, rtol=1e-5, atol=1e-6 * np.linalg.norm(e_field))


def test_field_points_must_be_above_surface():
    ch = ChargeDistribution([0.0], [0.0], [1e-12], 1e-6)
    with pytest.raises(DomainError):
        field_from_charges(ch, np.array([0.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        PointCharges([[0.0, 0.0, 1e-6]], [1.0])


def test_uniform_field_window():
    f = uniform_field(np.array([0.0, 0.0, 5.0]), (0.0, 1.0))
    out = f(np.array([[0.0, 0.5, 1.0], [0.0, 2.0, 1.0]]))
    assert out[0, 2] == 5.0 and out[1, 2] == 0.0


# ---------------------------------------------------------------- tracing


@pytest.mark.parametrize("ez", [-50.0, 30.0, -2e3])
def test_uniform_field_deflection_closed_form(ez):
    length, D = 0.01, 0.3
    start = TrajectoryState(np.array([0.0, 0.0, 12e-6]), np.array([0.0, SPEED, 0.0]))
    tr = propagate_electron(start, uniform_field(np.array([0.0, 0.0, ez])), y_end=length, detector_distance=D)
    a = -CONST.elementary_charge / CONST.electron_mass * ez
    T = length / SPEED
    expected = a * T * T / 2 + a * T * D / SPEED
    assert tr.outcome == "detector"
    assert tr.deflection == pytest.approx(expected, rel=1e-8)


def test_energy_conservation(steady_charge):
    tr = propagate_electron(
        beam_launch(0.0, 12e-6, SPEED), steady_charge, y_end=steady_charge.length + ENTRY_MARGIN,
        potential=lambda p: potential_from_charges(steady_charge, p),
    )
    assert tr.outcome == "detector"
    assert tr.max_energy_error <= 1e-8


def test_energy_error_shrinks_with_step():
    pc = PointCharges([[0.0, 0.005, -1e-6]], [1e-15], 12.9)

    def run(dt):
        return propagate_electron(beam_launch(0.0, 5e-6, SPEED), pc, dt=dt, y_end=0.011,
                                  potential=lambda p: potential_from_charges(pc, p)).max_energy_error

    coarse = run(0.011 / SPEED / 2000)
    fine = run(0.011 / SPEED / 8000)
    assert fine < coarse / 8


def test_collision_detected():
    pull = uniform_field(np.array([0.0, 0.0, 1e6]))  # pushes the electron into the wall
    tr = propagate_electron(beam_launch(0.0, 1e-6, SPEED), pull, y_end=0.01)
    assert tr.outcome == "collision" and tr.deflection is None


def test_leapfrog_free_flight():
    s = TrajectoryState(np.array([0.0, 0.0, 1e-5]), np.array([1.0, 2.0, 3.0]))
    out = leapfrog(s, uniform_field(np.zeros(3)), 1e-3, 10)
    assert np.allclose(out.position, s.position + 1e-2 * s.velocity)
    assert out.time == pytest.approx(1e-2)


def test_propagate_input_checks():
    f = uniform_field(np.zeros(3))
    with pytest.raises(DomainError):
        propagate_electron(TrajectoryState([0, 0, 1e-6], [0, -1.0, 0]), f)
    with pytest.raises(DomainError):
        propagate_electron(TrajectoryState([0, 0, -1e-6], [0, 1.0, 0]), f)


def test_shift_calibration_reproduces_constant(steady_charge):
    assert calibrate_shift(steady_charge) == pytest.approx(SHIFT_CALIBRATION, rel=1e-3)


def test_approx_and_trace_agree_at_centre(steady_charge):
    approx = vertical_shift_approx(steady_charge)
    traced = traced_deflection(steady_charge)
    assert approx > 0
    assert approx == pytest.approx(traced, rel=0.01)


def test_scan_is_translation_of_one_solution():
    xs = [-1e-4, 0.0, 1e-4]
    scan = deflection_scan(RateParameters(), SUPER_BANDGAP, xs, mesh=S.default_mesh_1d(SUPER_BANDGAP, cells=60))
    assert scan.status == ("ok", "ok", "ok")
    assert scan.deflection[0] == pytest.approx(scan.deflection[2], rel=1e-6)
    with pytest.raises(DomainError):
        deflection_scan(RateParameters(), SUPER_BANDGAP, xs, method="exact")


# ---------------------------------------------------------------- diffraction

BEAM = BeamParameters(speed=SPEED, coherence_length=400e-9)


@pytest.fixture(scope="module")
def patterns():
    return {rd: diffraction_pattern(BEAM, rd) for rd in (0.0, 0.15, 0.5, 1.0, 3.0, math.inf)}


def test_pattern_normalised(patterns):
    for p in patterns.values():
        assert integrate.trapezoid(p.intensity, p.x) == pytest.approx(1.0, rel=1e-12)
        assert np.all(p.intensity >= 0)


def test_coherent_contrast_high(patterns):
    assert contrast(patterns[0.0]) >= 0.98


def test_contrast_strictly_decreasing(patterns):
    vals = [contrast(patterns[rd]) for rd in sorted(patterns)]
    assert np.all(np.diff(vals) < 0)
    assert contrast(patterns[math.inf]) == pytest.approx(0.0, abs=1e-12)


def test_ideal_two_slit_contrast_is_one():
    p = diffraction_pattern(BEAM, 0.0, GratingSetup(slits=2, blur=0.0))
    assert contrast(p) == pytest.approx(1.0, abs=1e-6)


def test_peak_broadens_with_decoherence(patterns):
    a, b = central_fwhm(patterns[0.15]), central_fwhm(patterns[1.0])
    noise = abs(central_fwhm(diffraction_pattern(BEAM, 0.15, GratingSetup(samples=8001))) - a)
    assert b - a > 3 * max(noise, 1e-15)


def test_pair_damping():
    assert pair_damping(400e-9, 400e-9, 1.0) == pytest.approx(math.exp(-1))
    assert pair_damping(0.0, 400e-9, 5.0) == 1.0


def test_grating_validation():
    with pytest.raises(DomainError):
        GratingSetup(slit_width=200e-9)
    with pytest.raises(DomainError):
        diffraction_pattern(BEAM, -1.0)


# ---------------------------------------------------------------- gap


def test_gap_geometry():
    g = GapGeometry()
    assert g.wall_angle == pytest.approx(math.atan(7e-6 / 15e-3))
    assert g.straight_limit == pytest.approx(math.atan(8e-6 / 15e-3))
    with pytest.raises(DomainError):
        GapGeometry(entry_gap=1e-6, exit_gap=2e-6)


def test_axial_ray_passes_untouched():
    p = trace_ray(GapGeometry(), 0.0, 0.0)
    assert p.transmitted and p.reflections == 0


def test_reflections_grow_with_tilt():
    g = GapGeometry()
    counts = [trace_ray(g, 0.0, t).reflections for t in (1e-3, 1e-2, 5e-2)]
    assert counts[0] < counts[1] < counts[2]


def test_near_grazing_ray_is_turned_back():
    # each bounce on the converging walls steepens the ray by twice the wall angle
    p = trace_ray(GapGeometry(), 0.0, 1.4)
    assert not p.transmitted and p.reflections >= 1


def test_transmission_peaks_at_zero_tilt():
    g = GapGeometry(survival=0.5)
    tilts = np.linspace(-2e-3, 2e-3, 9)
    t = [gap_transmission(g, a, rays=101).transmission for a in tilts]
    i0 = int(np.argmax(t))
    assert tilts[i0] == 0.0
    assert np.all(np.diff(t[: i0 + 1]) >= 0) and np.all(np.diff(t[i0:]) <= 0)


def test_reflections_beyond_straight_limit():
    g = GapGeometry()
    r = gap_transmission(g, 1.5 * g.straight_limit, rays=101)
    assert r.mean_reflections >= 1


def test_symmetric_in_tilt():
    g = GapGeometry(survival=0.7)
    a, b = gap_transmission(g, 4e-4, rays=101), gap_transmission(g, -4e-4, rays=101)
    assert a.transmission == pytest.approx(b.transmission, rel=1e-12)


@given(st.floats(1e-7, 1e-5), st.floats(1e-7, 1e-5), st.floats(1e-5, 1e-2), st.floats(1e-8, 5e-7))
def test_segment_inverse_cube_matches_quadrature(z0, z1, length, z_min):
    exact = segment_inverse_cube_integral(z0, z1, length, z_min)

    def f(s):
        return max(z0 + (z1 - z0) * s / length, z_min) ** -3

    ref = integrate.quad(f, 0.0, length, epsrel=1e-11, limit=400)[0]
    assert exact == pytest.approx(ref, rel=1e-7)


def test_path_mean_inverse_cube_constant_height():
    assert path_mean_inverse_cube([0.0, 1.0, 2.0], [2e-6, 2e-6, 2e-6], 1e-9) == pytest.approx(2e-6**-3)


def test_bounce_average_requires_cutoff():
    with pytest.raises(DomainError):
        bounce_averaged_z3(GapGeometry(), 0.0, 0.0)
    avg = bounce_averaged_z3(GapGeometry(), 0.0, 1e-9, rays=51)
    assert avg.rays_used > 0 and avg.effective_height < 7.5e-6
