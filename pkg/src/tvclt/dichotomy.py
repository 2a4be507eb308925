"""The Delta_n series of a summand law and its convergence rate."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .convolve import DEFAULT_GRID_POINTS
from .distkit import MixtureDistribution
from .errors import InsufficientPoints, InvalidParameter, MixedBranch
from .tvmetric import DistanceReport, tv_to_matched_normal

DEFAULT_N_VALUES = tuple(2**k for k in range(2, 11))
ONE_TOL = 1e-9
CONVERGING_TOL = 1e-6
NOISE_FACTOR = 10.0
DROP_SMALLEST = 2
MIN_POINTS = 4


class Branch(str, enum.Enum):
    DEGENERATE_TV_ONE = "degenerate_tv_one"
    CONVERGING = "converging"


@dataclass(frozen=True)
class RateFit:
    n_values: tuple[int, ...]
    deltas: tuple[float, ...]
    slope: float | None
    c_hat: float
    branch: Branch
    fitted: tuple[int, ...] = field(default=())
    dropped: tuple[int, ...] = field(default=())


def delta_series(
    F: MixtureDistribution,
    n_values=DEFAULT_N_VALUES,
    grid_points: int = DEFAULT_GRID_POINTS,
    threads: int | None = None,
) -> list[DistanceReport]:
    """``Delta_n`` for every ``n``, computed in parallel, in input order."""
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise InvalidParameter("n_values must be nonempty")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise InvalidParameter("n_values must be strictly increasing")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda n: tv_to_matched_normal(F, n, grid_points), n_values))


def fit_rate(n_values, deltas, tolerances=None, drop_smallest: int = DROP_SMALLEST) -> RateFit:
    """Least-squares slope of ``log Delta_n`` against ``log n``.

    The smallest ``drop_smallest`` values of ``n`` and points within
    ``NOISE_FACTOR`` tolerances of zero are left out of the fit.
    """
    n = np.asarray(n_values, dtype=np.float64)
    d = np.asarray(deltas, dtype=np.float64)
    tol = np.zeros_like(d) if tolerances is None else np.asarray(tolerances, dtype=np.float64)
    if n.shape != d.shape or n.shape != tol.shape:
        raise InvalidParameter("n, deltas and tolerances must have equal length")
    if np.any(np.diff(n) <= 0):
        raise InvalidParameter("n values must be strictly increasing")
    ns, ds = tuple(int(x) for x in n), tuple(float(x) for x in d)
    c_hat = float(np.max(d * np.sqrt(n))) if len(n) else math.nan
    ones = d >= 1 - ONE_TOL
    if np.all(ones):
        return RateFit(ns, ds, None, c_hat, Branch.DEGENERATE_TV_ONE)
    if np.any(ones) and np.any(d < 1 - ONE_TOL - tol):
        raise MixedBranch("some distances equal one while others are below one")
    keep = np.arange(len(n)) >= drop_smallest
    keep &= d > NOISE_FACTOR * tol
    keep &= d < 1 - CONVERGING_TOL
    if keep.sum() < MIN_POINTS:
        raise InsufficientPoints(f"need {MIN_POINTS} usable points, have {int(keep.sum())}")
    slope = float(np.polyfit(np.log(n[keep]), np.log(d[keep]), 1)[0])
    c_fit = float(np.max(d[keep] * np.sqrt(n[keep])))
    return RateFit(
        ns, ds, slope, c_fit, Branch.CONVERGING,
        fitted=tuple(int(x) for x in n[keep]),
        dropped=tuple(int(x) for x in n[~keep]),
    )


def fit_series(n_values, reports: list[DistanceReport], drop_smallest: int = DROP_SMALLEST) -> RateFit:
    return fit_rate(n_values, [r.value for r in reports], [r.tolerance for r in reports], drop_smallest)
