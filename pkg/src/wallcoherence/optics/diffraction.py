"""Far-field grating pattern with decoherence-damped cross terms.

For ``N`` equally lit slits the intensity at detector coordinate ``u`` is::

    I(u) = E(u) * [N + 2 sum_{s=1}^{N-1} (N - s) D(s) cos(2 pi s d u / (lambda R))]

with single-slit envelope ``E = sinc^2(a u / (lambda R))``, slit period
``d``, slit width ``a``, distance ``R`` and pair damping
``D(s) = exp(-rd (s d / dx)^2)``.  The result is blurred by a Gaussian
detector response and normalised to unit integral.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import gaussian_filter1d

from ..core import BeamParameters, DomainError, _positive


@dataclass(frozen=True)
class GratingSetup:
    """Grating and detector description.

    ``blur`` is the standard deviation (m) of the detector response;
    ``orders`` is the half-range of the sampled window in diffraction orders.
    """

    period: float = 100e-9
    slit_width: float = 50e-9
    slits: int = 64
    distance: float = 0.3
    blur: float = 0.5e-6
    samples: int = 6001
    orders: float = 1.5

    def __post_init__(self) -> None:
        _positive("period", self.period)
        _positive("slit_width", self.slit_width)
        _positive("distance", self.distance)
        if self.slit_width > self.period:
            raise DomainError("slit width cannot exceed the period")
        if self.slits < 1 or self.samples < 11 or self.orders <= 0:
            raise DomainError("need slits >= 1, samples >= 11, orders > 0")
        if self.blur < 0:
            raise DomainError("blur must be non-negative")


@dataclass(frozen=True, eq=False)
class DiffractionPattern:
    """Intensity (unit integral) on detector coordinates ``x`` (m).

    ``envelope`` is the blurred single-slit envelope on the same grid with
    the same normalisation constant, for envelope-relative contrast.
    """

    x: np.ndarray
    intensity: np.ndarray
    envelope: np.ndarray
    rd: float
    order_spacing: float
    peak_metrics: dict = field(default_factory=dict)


def pair_damping(separation, coherence_length: float, rd: float):
    """exp(-rd (s / dx)^2); a pair at dx with rd = 1 keeps 1/e of its coherence."""
    s = np.asarray(separation, dtype=float)
    return np.exp(-rd * (s / coherence_length) ** 2)


def _blur(y: np.ndarray, sigma_samples: float) -> np.ndarray:
    if sigma_samples <= 0:
        return y
    return gaussian_filter1d(y, sigma_samples, mode="nearest", truncate=8.0)


def diffraction_pattern(beam: BeamParameters, rd: float, setup: GratingSetup = GratingSetup()) -> DiffractionPattern:
    """Pattern for decoherence amount ``rd`` (``inf`` keeps only the envelope)."""
    if not rd >= 0:
        raise DomainError("rd must be non-negative")
    lam = beam.de_broglie_wavelength
    spacing = lam * setup.distance / setup.period
    x = np.linspace(-setup.orders * spacing, setup.orders * spacing, setup.samples)
    h = x[1] - x[0]
    env = np.sinc(setup.slit_width * x / (lam * setup.distance)) ** 2
    n = setup.slits
    s = np.arange(1, n)
    if np.isinf(rd):
        weights = np.zeros(s.size)
    else:
        weights = (n - s) * pair_damping(s * setup.period, beam.coherence_length, rd)
    phase = 2 * np.pi * setup.period / (lam * setup.distance)
    cross = np.cos(phase * np.outer(x, s)) @ weights
    raw = env * (n + 2 * cross)
    sig = setup.blur / h
    inten = _blur(np.clip(raw, 0.0, None), sig)
    envb = _blur(env * n, sig)
    norm = trapezoid(inten, x)
    pat = DiffractionPattern(x, inten / norm, envb / norm, float(rd), spacing)
    return DiffractionPattern(x, pat.intensity, pat.envelope, pat.rd, spacing, peak_metrics=_metrics(pat))


def _central_window(p: DiffractionPattern) -> np.ndarray:
    return (p.x >= 0) & (p.x <= p.order_spacing)


def contrast(p: DiffractionPattern) -> float:
    """(max - min)/(max + min) of intensity / envelope from the centre to the first order.

    Dividing by the single-slit envelope removes its slow fall-off, so an
    incoherent sum scores 0 and an ideal pattern 1.  A flat pattern gives 0.
    """
    w = _central_window(p)
    ratio = p.intensity[w] / np.maximum(p.envelope[w], 1e-300)
    hi, lo = float(ratio.max()), float(ratio.min())
    if hi + lo <= 0:
        return 0.0
    return (hi - lo) / (hi + lo)


def central_fwhm(p: DiffractionPattern) -> float:
    """Full width at half maximum (m) of the zeroth-order peak, linearly interpolated."""
    i0 = int(np.argmin(np.abs(p.x)))
    half = 0.5 * p.intensity[i0]
    y = p.intensity
    r = i0
    while r + 1 < y.size and y[r + 1] > half:
        r += 1
    l = i0
    while l > 0 and y[l - 1] > half:
        l -= 1
    if r + 1 >= y.size or l == 0:
        return float(p.x[-1] - p.x[0])
    xr = p.x[r] + (half - y[r]) * (p.x[r + 1] - p.x[r]) / (y[r + 1] - y[r])
    xl = p.x[l] + (half - y[l]) * (p.x[l - 1] - p.x[l]) / (y[l - 1] - y[l])
    return float(xr - xl)


def _metrics(p: DiffractionPattern) -> dict:
    return {"contrast": contrast(p), "central_fwhm": central_fwhm(p), "order_spacing": p.order_spacing}
