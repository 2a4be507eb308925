"""Stein equation for indicator test functions and the resulting bound on Delta_n.

For ``h = 1_A`` the solution of ``f'(w) - w f(w) = h(w) - Nh`` is

    f(w) = e^{w^2/2} int_{-inf}^w (1_A(x) - Nh) e^{-x^2/2} dx.

It is evaluated from the left tail for ``w <= 0`` and from the equivalent
right-tail integral for ``w > 0``, with every ``e^{w^2/2} Phi(x)`` product
formed through ``erfcx`` so nothing overflows.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr

from .convolve import DEFAULT_GRID_POINTS, self_convolve
from .distkit import MixtureDistribution, affine, l1_distance, moments, standardize
from .errors import InvalidParameter
from .tvmetric import atom_difference, shift_tv

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
PROFILE_POINTS = 512
FD_STEP = 1e-3


@dataclass(frozen=True)
class BorelSetSpec:
    """A finite union of disjoint intervals, possibly with infinite ends."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        iv = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        for lo, hi in iv:
            if not lo < hi:
                raise InvalidParameter(f"empty or reversed interval ({lo}, {hi})")
        for (_, h0), (l1, _) in zip(iv, iv[1:]):
            if not h0 <= l1:
                raise InvalidParameter("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", iv)

    def indicator(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        out = np.zeros(w.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (w > lo) & (w < hi)
        return out.astype(np.float64)

    def normal_measure(self) -> float:
        return float(sum(ndtr(hi) - ndtr(lo) for lo, hi in self.intervals))

    @property
    def endpoints(self) -> np.ndarray:
        pts = np.array([p for iv in self.intervals for p in iv])
        return pts[np.isfinite(pts)]


def random_set(rng: np.random.Generator, max_intervals: int = 4) -> BorelSetSpec:
    """Random union of up to ``max_intervals`` intervals; ends may be infinite."""
    k = int(rng.integers(1, max_intervals + 1))
    pts = np.sort(rng.normal(0.0, 2.0, 2 * k))
    if rng.random() < 0.25:
        pts[0] = -math.inf
    if rng.random() < 0.25:
        pts[-1] = math.inf
    return BorelSetSpec(tuple(zip(pts[::2], pts[1::2])))


def _lower(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    # e^{w^2/2} Phi(x) for x <= w <= 0
    with np.errstate(invalid="ignore", over="ignore"):
        out = 0.5 * erfcx(-x / SQRT2) * np.exp(0.5 * (w * w - x * x))
    return np.where(np.isneginf(x), 0.0, out)


def _upper(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    # e^{w^2/2} (1 - Phi(x)) for x >= w >= 0
    with np.errstate(invalid="ignore", over="ignore"):
        out = 0.5 * erfcx(x / SQRT2) * np.exp(0.5 * (w * w - x * x))
    return np.where(np.isposinf(x), 0.0, out)


def stein_f(A: BorelSetSpec, w, nh: float | None = None) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    nh = A.normal_measure() if nh is None else nh
    out = np.zeros(w.shape)
    neg = w <= 0
    wl, wr = w[neg], w[~neg]
    left = -nh * _lower(wl, wl)
    right = -nh * _upper(wr, wr)
    for lo, hi in A.intervals:
        lo_l = np.minimum(lo, wl)
        hi_l = np.minimum(hi, wl)
        left += np.where(lo < wl, _lower(hi_l, wl) - _lower(lo_l, wl), 0.0)
        lo_r = np.maximum(lo, wr)
        hi_r = np.maximum(hi, wr)
        right += np.where(hi > wr, _upper(lo_r, wr) - _upper(hi_r, wr), 0.0)
    out[neg] = SQRT2PI * left
    out[~neg] = -SQRT2PI * right
    return out


@dataclass(frozen=True)
class SteinSolution:
    set: BorelSetSpec
    nh: float
    grid: np.ndarray
    f: np.ndarray
    fprime: np.ndarray

    @property
    def sup_fprime(self) -> float:
        return float(np.max(np.abs(self.fprime)))

    def residual(self) -> float:
        """Max equation residual with ``f'`` from 5-point differences of ``f``.

        Grid points within three difference steps of a set endpoint are
        skipped, since ``f'`` jumps there.
        """
        w = self.grid
        ends = self.set.endpoints
        keep = np.ones(w.shape, dtype=bool)
        if len(ends):
            keep = np.min(np.abs(w[:, None] - ends[None, :]), axis=1) > 3 * FD_STEP
        w = w[keep]
        if not len(w):
            return 0.0
        e = FD_STEP
        fv = [stein_f(self.set, w + k * e, self.nh) for k in (-2, -1, 1, 2)]
        deriv = (fv[0] - 8 * fv[1] + 8 * fv[2] - fv[3]) / (12 * e)
        rhs = w * stein_f(self.set, w, self.nh) + self.set.indicator(w) - self.nh
        return float(np.max(np.abs(deriv - rhs)))


def solve_stein(A: BorelSetSpec, lo: float = -8.0, hi: float = 8.0, points: int = 1601) -> SteinSolution:
    w = np.linspace(lo, hi, points)
    nh = A.normal_measure()
    f = stein_f(A, w, nh)
    fprime = w * f + A.indicator(w) - nh
    return SteinSolution(A, nh, w, f, fprime)


class ShiftProfile:
    """``s -> d_TV(S_{n-1}, S_{n-1} + s)`` for a standardized summand, tabulated.

    The table holds ``PROFILE_POINTS`` values on ``[0, s_max]`` and is built
    once under a lock; between nodes the profile is interpolated linearly.
    """

    def __init__(self, F: MixtureDistribution, n: int, s_max: float, grid_points: int = DEFAULT_GRID_POINTS):
        if n < 2:
            raise InvalidParameter(f"n must be at least 2, got {n}")
        self.F = F
        self.n = int(n)
        self.s_max = float(max(s_max, 1e-12))
        self.grid_points = grid_points
        self._lock = threading.Lock()
        self._table: tuple[np.ndarray, np.ndarray, float] | None = None

    def table(self) -> tuple[np.ndarray, np.ndarray, float]:
        with self._lock:
            if self._table is None:
                S = self_convolve(self.F, self.n - 1, grid_points=self.grid_points)
                s = np.linspace(0.0, self.s_max, PROFILE_POINTS)
                d = np.zeros(PROFILE_POINTS)
                for i, si in enumerate(s[1:], start=1):
                    T = affine(S, 1.0, float(si))
                    d[i] = min(0.5 * (atom_difference(S.atomic, T.atomic) + l1_distance(S.density, T.density)), 1.0)
                tol = 2 * S.error_budget + 2 * S.atomic.pruned
                if S.density is not None:
                    tol += 2 * S.density.interpolation_error()
                self._table = (s, d, tol)
            return self._table

    def __call__(self, s) -> np.ndarray:
        grid, d, _ = self.table()
        return np.interp(np.abs(np.asarray(s, dtype=np.float64)), grid, d)

    def mean_over_unit(self, v) -> np.ndarray:
        """``int_0^1 d(v u) du``, exact for the piecewise-linear profile."""
        grid, d, _ = self.table()
        cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(grid) * (d[1:] + d[:-1]))))
        v = np.abs(np.asarray(v, dtype=np.float64))
        i = np.clip(np.searchsorted(grid, v, side="right") - 1, 0, len(grid) - 2)
        t = v - grid[i]
        dv = np.interp(v, grid, d)
        part = cum[i] + 0.5 * t * (d[i] + dv)
        return np.divide(part, v, out=np.zeros_like(v), where=v > 0)

    @property
    def tolerance(self) -> float:
        return self.table()[2]


def shift_profile(F: MixtureDistribution, n: int, s: float, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """``d_{n,s} = d_TV(S_{n-1} + |s|, S_{n-1})`` for the standardized summand."""
    if n < 2:
        raise InvalidParameter(f"n must be at least 2, got {n}")
    return shift_tv(standardize(F), n - 1, abs(s), grid_points).value


def theorem_bound_rhs(F: MixtureDistribution, n: int, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """``4 int {d_{n,v} + v^2 int_0^1 d_{n,vu} du} dF(v)`` for the standardized ``F``."""
    if n < 2:
        raise InvalidParameter(f"n must be at least 2, got {n}")
    m = moments(F)
    if m.variance <= 0:
        # S_n is a point mass; every shift is at distance 1
        return 4.0
    Z = standardize(F)
    lo, hi = Z.support()
    profile = ShiftProfile(Z, n, max(abs(lo), abs(hi)), grid_points)

    def integrand(v):
        return profile(v) + v * v * profile.mean_over_unit(v)

    total = float(np.dot(Z.atomic.masses, integrand(Z.atomic.locations)))
    if Z.density is not None:
        total += float(np.dot(Z.density.node_weights(), integrand(Z.density.grid)))
    return 4.0 * total
