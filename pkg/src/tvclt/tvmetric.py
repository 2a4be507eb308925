"""Total-variation and Kolmogorov distances between mixture laws.

TV is computed in density form, ``(sum_x |p_F(x) - p_G(x)| + int |f_F - f_G|) / 2``,
with atoms matched by location and densities differenced exactly as
piecewise-linear functions on the union of their grids.  Every report carries
a tolerance: both operands' error budgets plus an estimate of the
interpolation error of the grids involved.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .convolve import DEFAULT_GRID_POINTS, self_convolve
from .distkit import ATOM_TOL, AtomicMeasure, GridDensity, MixtureDistribution, affine, l1_distance, moments
from .errors import InvalidParameter

NORMALIZATION_TOL = 1e-6


class DistanceKind(str, enum.Enum):
    TV = "tv"
    KOLMOGOROV = "kolmogorov"


@dataclass(frozen=True)
class DistanceReport:
    value: float
    tolerance: float
    kind: DistanceKind = DistanceKind.TV

    def __post_init__(self):
        object.__setattr__(self, "value", float(min(max(self.value, 0.0), 1.0)))
        object.__setattr__(self, "tolerance", float(max(self.tolerance, 0.0)))


def _check_normalized(*laws: MixtureDistribution) -> None:
    for F in laws:
        if abs(F.mass - 1.0) > NORMALIZATION_TOL + F.error_budget:
            raise InvalidParameter(f"law is not normalized: mass {F.mass!r}")


def _quadrature_error(*laws: MixtureDistribution) -> float:
    return sum(F.density.interpolation_error() for F in laws if F.density is not None)


def _tolerance(*laws: MixtureDistribution) -> float:
    # pruned atoms have no location, so they may or may not match
    pruned = sum(F.atomic.pruned for F in laws)
    return sum(F.error_budget for F in laws) + _quadrature_error(*laws) + pruned


def atom_difference(A: AtomicMeasure, B: AtomicMeasure, tol: float = ATOM_TOL) -> float:
    """``sum_x |A{x} - B{x}|`` with locations closer than ``tol`` treated as equal."""
    loc = np.concatenate((A.locations, B.locations))
    if not len(loc):
        return 0.0
    signed = np.concatenate((A.masses, -B.masses))
    order = np.argsort(loc, kind="stable")
    loc, signed = loc[order], signed[order]
    starts = np.concatenate(([True], np.diff(loc) > tol))
    return float(np.abs(np.add.reduceat(signed, np.flatnonzero(starts))).sum())


def mutually_singular(F: MixtureDistribution, G: MixtureDistribution) -> bool:
    """True when one law is purely atomic and the other has no atoms."""
    return (F.is_atomic and G.atomic.size == 0 and G.density is not None) or (
        G.is_atomic and F.atomic.size == 0 and F.density is not None
    )


def tv_distance(F: MixtureDistribution, G: MixtureDistribution) -> DistanceReport:
    _check_normalized(F, G)
    if mutually_singular(F, G):
        return DistanceReport(1.0, 0.0)
    atoms = atom_difference(F.atomic, G.atomic)
    dens = l1_distance(F.density, G.density)
    return DistanceReport(0.5 * (atoms + dens), _tolerance(F, G))


def normal_pdf(x, mean: float, sd: float) -> np.ndarray:
    z = (np.asarray(x, dtype=np.float64) - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi))


def tv_to_normal(F: MixtureDistribution, mean: float, sd: float) -> DistanceReport:
    """TV between ``F`` and ``N(mean, sd**2)``, the normal evaluated analytically.

    ``|p - phi|`` is integrated by the trapezoid rule on the grid nodes of the
    density part; normal mass outside the grid is added in closed form.
    """
    _check_normalized(F)
    if sd <= 0:
        raise InvalidParameter("normal scale must be positive")
    if F.density is None:
        return DistanceReport(1.0, 0.0)
    d = F.density
    phi = normal_pdf(d.grid, mean, sd)
    lo = np.abs(d.right[:-1] - phi[:-1])
    hi = np.abs(d.values[1:] - phi[1:])
    inside = 0.5 * d.step * float(np.sum(lo + hi))
    # trapezoid error from the curvature and kinks of |p - phi|
    slopes = (hi - lo) / d.step
    quad_err = d.step**2 * float(np.abs(np.diff(slopes)).sum()) / 8
    outside = ndtr((d.origin - mean) / sd) + ndtr(-(d.hi - mean) / sd)
    value = 0.5 * (F.atomic.total + inside + outside)
    return DistanceReport(value, F.error_budget + F.atomic.pruned + quad_err)


def tv_to_matched_normal(
    F: MixtureDistribution, n: int, grid_points: int = DEFAULT_GRID_POINTS
) -> DistanceReport:
    """``Delta_n``: TV between ``S_n`` and the normal with the moments of ``S_n``.

    A purely atomic ``S_n`` (in particular any law with zero variance) is at
    distance exactly 1 from every normal, so no convolution is done.
    """
    if int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer, got {n}")
    _check_normalized(F)
    if F.is_atomic or moments(F).variance == 0:
        return DistanceReport(1.0, 0.0)
    S = self_convolve(F, int(n), grid_points=grid_points)
    m = moments(S)
    return tv_to_normal(S, m.mean, m.sd)


def shift_tv(
    F: MixtureDistribution, n: int, gamma: float, grid_points: int = DEFAULT_GRID_POINTS
) -> DistanceReport:
    """``d_TV(S_n, S_n + gamma)``."""
    if gamma < 0:
        raise InvalidParameter(f"gamma must be nonnegative, got {gamma}")
    if gamma == 0:
        return DistanceReport(0.0, 0.0)
    S = self_convolve(F, int(n), grid_points=grid_points)
    return tv_distance(S, affine(S, 1.0, float(gamma)))


def _density_cdf(d: GridDensity, x: np.ndarray) -> np.ndarray:
    # exact integral of the piecewise-linear density up to x
    h = d.step
    pieces = 0.5 * h * (d.right[:-1] + d.values[1:])
    cum = np.concatenate(([0.0], np.cumsum(pieces)))
    t = (x - d.origin) / h
    i = np.clip(np.floor(t).astype(np.int64), 0, d.size - 2)
    u = np.clip(x - (d.origin + i * h), 0.0, h)
    slope = (d.values[i + 1] - d.right[i]) / h
    out = cum[i] + u * (d.right[i] + 0.5 * slope * u)
    out = np.where(x < d.origin, 0.0, out)
    return np.where(x >= d.hi, cum[-1], out)


def cdf(F: MixtureDistribution, x, left: bool = False) -> np.ndarray:
    """``F(x)``, or the left limit ``F(x-)`` when ``left`` is set."""
    x = np.asarray(x, dtype=np.float64)
    cm = np.concatenate(([0.0], np.cumsum(F.atomic.masses)))
    side = "left" if left else "right"
    out = cm[np.searchsorted(F.atomic.locations, x, side=side)]
    if F.density is not None:
        out = out + _density_cdf(F.density, x)
    return out


def kolmogorov_distance(F: MixtureDistribution, G: MixtureDistribution) -> DistanceReport:
    """``sup_x |F(x) - G(x)|`` over merged grid points and atom locations."""
    _check_normalized(F, G)
    pts = [F.atomic.locations, G.atomic.locations]
    pts += [L.density.grid for L in (F, G) if L.density is not None]
    x = np.unique(np.concatenate(pts))
    if not len(x):
        return DistanceReport(0.0, 0.0, DistanceKind.KOLMOGOROV)
    gap = max(
        float(np.max(np.abs(cdf(F, x) - cdf(G, x)))),
        float(np.max(np.abs(cdf(F, x, left=True) - cdf(G, x, left=True)))),
    )
    return DistanceReport(gap, _tolerance(F, G), DistanceKind.KOLMOGOROV)
