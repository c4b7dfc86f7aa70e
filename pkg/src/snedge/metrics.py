"""Error functionals between approximations and references, and log-log rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .special_math import integrate_pieces, normal_logpdf

RATE_CSV_COLUMNS = ("n", "metric", "m", "law", "value", "stderr")
ENTROPY_FLOOR = 1e-300


class RateFitError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


def weighted_sup_error(approx: Callable, reference: Callable, m: float, grid) -> float:
    """``max_x (1 + |x|)^m |approx(x) - reference(x)|`` over the grid."""
    x = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise ValueError("grid must be non-empty")
    diff = np.abs(np.asarray(approx(x), dtype=float) - np.asarray(reference(x), dtype=float))
    return float(np.max((1.0 + np.abs(x)) ** m * diff))


def _pieces(interval, breakpoints):
    lo, hi = interval
    pts = [lo, hi]
    if breakpoints is not None:
        pts += [p for p in breakpoints if lo < p < hi]
    return sorted(pts)


def l1_distance(
    f: Callable,
    g: Callable,
    interval=(-12.0, 12.0),
    breakpoints: Optional[Iterable[float]] = None,
    tol: float = 1e-10,
) -> float:
    """``int |f - g|`` over ``interval``.

    For two densities this is the total variation distance in the
    convention where TV equals the L1 norm of the density difference.
    """
    return lp_distance(f, g, 1, interval, breakpoints, tol)


def lp_distance(
    f: Callable,
    g: Callable,
    p: float,
    interval=(-12.0, 12.0),
    breakpoints: Optional[Iterable[float]] = None,
    tol: float = 1e-10,
) -> float:
    """``(int |f - g|^p)^{1/p}`` by adaptive quadrature."""
    if p < 1:
        raise ValueError("p must be >= 1")
    value = integrate_pieces(
        lambda x: np.abs(np.asarray(f(x)) - np.asarray(g(x))) ** p, _pieces(interval, breakpoints), tol
    )
    return value ** (1.0 / p)


def relative_entropy(
    p: Callable,
    interval=(-12.0, 12.0),
    logp: Optional[Callable] = None,
    breakpoints: Optional[Iterable[float]] = None,
    tol: float = 1e-12,
) -> float:
    """``int p log(p / phi)`` against the standard normal, with ``0 log 0 = 0``.

    ``p`` must integrate to 1 (checked to 1e-6). Supplying ``logp`` avoids
    taking logarithms of tiny densities. The standard normal is the right
    reference for symmetric inputs, where ``T_n`` has mean 0 and variance 1.
    """
    pieces = _pieces(interval, breakpoints)
    mass = integrate_pieces(p, pieces, tol)
    if abs(mass - 1.0) > 1e-6:
        raise NormalizationError(f"density integrates to {mass!r}, not 1")

    def integrand(x):
        px = np.asarray(p(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = np.asarray(logp(x), dtype=float) if logp is not None else np.log(px)
            val = px * (lp - normal_logpdf(x))
        return np.where(px < ENTROPY_FLOOR, 0.0, val)

    value = integrate_pieces(integrand, pieces, tol)
    if value < -1e-10:
        raise ArithmeticError(f"relative entropy came out negative ({value!r})")
    return value


@dataclass(frozen=True)
class RateReport:
    """Least-squares fit of ``log(error)`` on ``log(n)``."""

    pairs: tuple[tuple[int, float], ...]
    slope: float
    intercept: float
    r_squared: float

    def predicted(self, n: float) -> float:
        return math.exp(self.intercept) * n**self.slope


def rate_fit(pairs: Sequence[tuple[int, float]]) -> RateReport:
    pairs = tuple((int(n), float(e)) for n, e in pairs)
    if len(pairs) < 3:
        raise RateFitError("need at least three (n, error) pairs")
    ns = [n for n, _ in pairs]
    if len(set(ns)) != len(ns):
        raise RateFitError("n values must be distinct")
    if any(not e > 0 for _, e in pairs):
        raise RateFitError("errors must be positive for a log-log fit")
    x = np.log(np.array(ns, dtype=float))
    y = np.log(np.array([e for _, e in pairs]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateReport(pairs, float(slope), float(intercept), r2)


def noise_corrected_sup_error(
    estimate: np.ndarray,
    reference: np.ndarray,
    replications: int,
    m: float,
    grid: np.ndarray,
) -> float:
    """Weighted sup error of an ECDF after removing a simultaneous noise band.

    The band at ``x`` is ``sqrt(2 log G) * sqrt(F(1-F)/N)`` with ``F`` taken
    from the reference (the ECDF itself has zero spread where it saw no
    data) and ``G`` the number of grid points.
    """
    grid = np.asarray(grid, dtype=float)
    F = np.clip(np.asarray(reference, dtype=float), 0.0, 1.0)
    band = math.sqrt(2.0 * math.log(grid.size)) * np.sqrt(F * (1.0 - F) / replications)
    excess = np.maximum(np.abs(np.asarray(estimate) - np.asarray(reference)) - band, 0.0)
    return float(np.max((1.0 + np.abs(grid)) ** m * excess))


__all__ = [
    "RATE_CSV_COLUMNS",
    "NormalizationError",
    "RateFitError",
    "RateReport",
    "l1_distance",
    "lp_distance",
    "noise_corrected_sup_error",
    "rate_fit",
    "relative_entropy",
    "weighted_sup_error",
]
