"""Adaptive quadrature that fails loudly.

Thin layer over `scipy.integrate.quad`: any `IntegrationWarning` becomes a
`QuadratureError` carrying the sub-interval and estimates, and a result
whose error estimate exceeds the requested tolerance is rejected as well.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate


class QuadratureError(ArithmeticError):
    """Non-convergent quadrature; ``region`` and ``detail`` locate the failure."""

    def __init__(self, message: str, region: tuple[float, float], detail: str = "") -> None:
        super().__init__(f"{message} on [{region[0]:.6g}, {region[1]:.6g}] {detail}".rstrip())
        self.region = region
        self.detail = detail


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float


def quad_strict(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float,
    abs_tol: float = 0.0,
    limit: int = 400,
    points: Sequence[float] | None = None,
) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` to ``rel_tol``; raise on any failure."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                f, a, b, epsrel=rel_tol, epsabs=abs_tol, limit=limit,
                points=points if points is not None and len(points) else None,
            )
        except integrate.IntegrationWarning as w:
            raise QuadratureError("quadrature did not converge", (a, b), str(w).splitlines()[0]) from w
    if not (math.isfinite(val) and math.isfinite(err)):
        raise QuadratureError("non-finite quadrature result", (a, b))
    if err > max(rel_tol * abs(val), abs_tol) * 10:
        raise QuadratureError("error estimate above tolerance", (a, b), f"value={val:.3e} err={err:.3e}")
    return QuadResult(val, err)


def quad_segments(
    f: Callable[[float], float],
    edges: Sequence[float],
    rel_tol: float,
    abs_tol: float = 0.0,
) -> QuadResult:
    """Sum `quad_strict` over consecutive segments, reporting the failing one.

    The pairwise sum fixes the reduction order.
    """
    vals, errs = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        r = quad_strict(f, a, b, rel_tol, abs_tol)
        vals.append(r.value)
        errs.append(r.error)
    return QuadResult(math.fsum(vals), math.fsum(errs))


def log_edges(lo: float, hi: float, per_decade: float = 1.0) -> np.ndarray:
    """Segment edges in log-space variables ``u = ln x`` from ``lo`` to ``hi``."""
    n = max(1, int(math.ceil((hi - lo) / math.log(10) * per_decade)))
    return np.linspace(lo, hi, n + 1)
