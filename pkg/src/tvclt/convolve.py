"""Convolution of mixture distributions.

Atomic parts are convolved exactly as sparse sum-sets.  Density parts are
convolved as their piecewise-linear interpolants: on aligned lattices with
a common step ``h`` the value of ``f * g`` at a node is an exact sum over
pairs of grid intervals, which reduces to two discrete convolutions computed
with real FFTs.  Atom-times-density terms are lattice shifts of the density.

Every approximation (resampling, negative FFT round-off, truncation of the
summation window, coarsening) is charged to the result's ``error_budget``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distkit import (
    TAIL_SIGMAS,
    AtomicMeasure,
    GridDensity,
    MixtureDistribution,
    add_on_lattice,
    moments,
    resample,
)
from .errors import AtomExplosion, GridOverflow, InvalidParameter

DEFAULT_GRID_POINTS = 2**14
MAX_GRID_POINTS = 2**24
MAX_ATOMS = 10**6
# direct summation below this many multiply-adds; FFT above
_DIRECT_LIMIT = 2**16


@dataclass
class ConvolutionPlan:
    """Workspace for one n-fold convolution; single use, never shared."""

    n: int
    grid_points: int
    domain: tuple[float, float]
    error_budget: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameter("n must be a positive integer")
        if self.grid_points < 256 or self.grid_points & (self.grid_points - 1):
            raise InvalidParameter("grid_points must be a power of two >= 256")
        if not self.domain[1] > self.domain[0]:
            raise InvalidParameter("plan domain must have hi > lo")

    def charge(self, amount: float) -> None:
        if amount > 0:
            self.error_budget += float(amount)


def plan_convolution(F: MixtureDistribution, n: int, grid_points: int = DEFAULT_GRID_POINTS) -> ConvolutionPlan:
    """Plan for the law of ``S_n``: its window is ``n*mean +- 12 sqrt(n) sd``."""
    lo, hi = window(F, n)
    if not hi > lo:
        hi = lo + 1.0
    return ConvolutionPlan(n, grid_points, (lo, hi))


def window(F: MixtureDistribution, n: int) -> tuple[float, float]:
    m = moments(F)
    slo, shi = F.support()
    half = TAIL_SIGMAS * math.sqrt(n * m.variance)
    return max(n * m.mean - half, n * slo), min(n * m.mean + half, n * shi)


def _linear_convolve(a: np.ndarray, b: np.ndarray, max_points: int = MAX_GRID_POINTS) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        return np.zeros(0)
    size = len(a) + len(b) - 1
    if size > max_points:
        raise GridOverflow(f"convolution grid of {size} points exceeds cap {max_points}")
    if len(a) * len(b) <= _DIRECT_LIMIT:
        return np.convolve(a, b)
    nfft = 1 << (size - 1).bit_length()
    return np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:size]


def _clip(values: np.ndarray, step: float) -> tuple[np.ndarray, float]:
    neg = values < 0
    if not neg.any():
        return values, 0.0
    lost = float(-values[neg].sum() * step)
    values = values.copy()
    values[neg] = 0.0
    return values, lost


def pl_convolve(f: GridDensity, g: GridDensity, max_points: int = MAX_GRID_POINTS) -> tuple[GridDensity, float]:
    """Exact node values of the convolution of two piecewise-linear densities.

    Both grids must share one step.  On a pair of grid intervals the
    integrand is a product of two linear functions, integrated exactly with
    weights (2, 1, 1, 2)/6.  Returns the density and the mass clipped from
    negative round-off.
    """
    h = f.step
    if not math.isclose(h, g.step, rel_tol=1e-12):
        raise InvalidParameter("pl_convolve needs a common grid step")
    out = np.zeros(f.size + g.size - 1)
    if f.size > 1 and g.size > 1:
        fl, fr = f.right[:-1], f.values[1:]
        gl, gr = g.right[:-1], g.values[1:]
        inner = _linear_convolve(fl, 2 * gr + gl, max_points) + _linear_convolve(fr, gr + 2 * gl, max_points)
        out[1:-1] = inner * (h / 6.0)
    out, lost = _clip(out, h)
    return GridDensity(f.origin + g.origin, h, out), lost


def quadrature_convolve_oracle(F: GridDensity | None, G: GridDensity | None, refine: int = 4) -> GridDensity | None:
    """Direct O(N*M) trapezoid-rule convolution, used to check the FFT path.

    Both densities are refined ``refine`` times (exactly, being piecewise
    linear) and the integral over ``y`` is taken by the trapezoid rule on the
    finer lattice of ``F``, evaluating ``G`` at the shifted points with the
    midpoint of the jump at its two ends.  The result is read back at every
    ``refine``-th node, the lattice of :func:`pl_convolve`.
    """
    if F is None or G is None:
        return None
    if G.step < F.step:
        F, G = G, F
    out_step = F.step
    h = out_step / refine
    F = resample(F, h, F.origin)[0]
    m = int(math.ceil((G.hi - G.origin) / h - 1e-9))
    z = G.origin + h * np.arange(m + 1)
    gz = G.evaluate(z)
    gz[0] = 0.5 * G.values[0]
    if abs(z[-1] - G.hi) <= 1e-9 * h:
        gz[-1] = 0.5 * G.values[-1]
    wf = 0.5 * (F.values + F.right)
    wf[0] *= 0.5
    wf[-1] *= 0.5
    out = np.convolve(wf, gz)[::refine] * h
    return GridDensity(F.origin + G.origin, out_step, np.clip(out, 0.0, None))


def convolve_atoms(A: AtomicMeasure, B: AtomicMeasure, max_atoms: int = MAX_ATOMS) -> AtomicMeasure:
    listed = float(A.masses.sum() * B.masses.sum())
    pruned = max(A.total * B.total - listed, 0.0)
    if A.size == 0 or B.size == 0:
        return AtomicMeasure(np.empty(0), np.empty(0), pruned)
    if A.size * B.size > 64 * max_atoms:
        raise AtomExplosion(f"sum-set of {A.size} x {B.size} atoms exceeds the cap of {max_atoms}")
    loc = np.add.outer(A.locations, B.locations).ravel()
    mass = np.multiply.outer(A.masses, B.masses).ravel()
    out = AtomicMeasure(loc, mass, pruned)
    if out.size > max_atoms:
        raise AtomExplosion(f"{out.size} atoms exceeds the cap of {max_atoms}")
    return out


def atomic_power(A: AtomicMeasure, n: int, max_atoms: int = MAX_ATOMS) -> AtomicMeasure:
    result, base = None, A
    while n:
        if n & 1:
            result = base if result is None else convolve_atoms(result, base, max_atoms)
        n >>= 1
        if n:
            base = convolve_atoms(base, base, max_atoms)
    return result


def _shift_by_atoms(A: AtomicMeasure, g: GridDensity, anchor: float, max_points: int) -> tuple[GridDensity, float]:
    """Superpose copies of ``g`` shifted by each atom, on the lattice ``anchor + g.origin + k h``.

    Off-lattice atoms are split linearly between the two neighbouring nodes.
    """
    h = g.step
    pos = (A.locations - anchor) / h
    base = np.floor(pos + 1e-9)
    frac = np.clip(pos - base, 0.0, 1.0)
    frac[frac < 1e-9] = 0.0
    k0 = int(base.min())
    n_w = int(base.max()) - k0 + 2
    if n_w > max_points:
        raise GridOverflow(f"atomic shift lattice of {n_w} points exceeds cap {max_points}")
    idx = (base - k0).astype(np.int64)
    w = np.zeros(n_w)
    np.add.at(w, idx, A.masses * (1 - frac))
    np.add.at(w, idx + 1, A.masses * frac)
    if w[-1] == 0:
        w = w[:-1]
    # each copy is zero left of its first node and right of its last node
    gl = g.values.copy()
    gl[0] = 0.0
    gr = g.right.copy()
    gr[-1] = 0.0
    left, lost_l = _clip(_linear_convolve(w, gl, max_points), h)
    right, lost_r = _clip(_linear_convolve(w, gr, max_points), h)
    off_mass = float(A.masses[frac > 0].sum())
    err = max(lost_l, lost_r)
    if off_mass:
        err += off_mass * h * (g.end_jumps() + g.jump_total()) / 2
    return GridDensity(anchor + k0 * h + g.origin, h, left, right), err


def convolve_pair(
    F: MixtureDistribution,
    G: MixtureDistribution,
    step: float | None = None,
    max_points: int = MAX_GRID_POINTS,
    max_atoms: int = MAX_ATOMS,
) -> MixtureDistribution:
    """Law of ``X + Y`` for independent ``X ~ F`` and ``Y ~ G``.

    ``step`` fixes the lattice spacing of the density part; by default the
    finer of the two input steps is used.
    """
    atomic = convolve_atoms(F.atomic, G.atomic, max_atoms)
    budget = F.error_budget + G.error_budget
    fd, gd = F.density, G.density
    if fd is None and gd is None:
        return MixtureDistribution(atomic, None, budget)
    if step is None:
        step = min(d.step for d in (fd, gd) if d is not None)
    if fd is not None:
        fd, e = resample(fd, step, fd.origin)
        budget += e
    if gd is not None:
        gd, e = resample(gd, step, gd.origin)
        budget += e
    # atoms of one side sit on the lattice anchored at the other side's origin
    f_anchor = fd.origin if fd is not None else 0.0
    g_anchor = gd.origin if gd is not None else 0.0
    parts = []
    if fd is not None and gd is not None:
        d, lost = pl_convolve(fd, gd, max_points)
        parts.append(d)
        # node values are exact; the interpolant's mass is not when f * g has curvature
        budget += lost + abs(fd.mass * gd.mass - lost - d.mass)
    if F.atomic.size and gd is not None:
        d, e = _shift_by_atoms(F.atomic, gd, f_anchor, max_points)
        parts.append(d)
        budget += e
    if G.atomic.size and fd is not None:
        d, e = _shift_by_atoms(G.atomic, fd, g_anchor, max_points)
        parts.append(d)
        budget += e
    # pruned atoms have no location; their cross mass with a density is dropped
    budget += F.atomic.pruned * G.ac_weight + G.atomic.pruned * F.ac_weight
    density = add_on_lattice(parts)
    if density is not None:
        density = density.trimmed()
        if density.size > max_points:
            raise GridOverflow(f"density grid of {density.size} points exceeds cap {max_points}")
    return MixtureDistribution(atomic, density, budget)


def _fit_to_plan(F: MixtureDistribution, k: int, summand: MixtureDistribution, plan: ConvolutionPlan) -> MixtureDistribution:
    """Truncate ``F`` (the law of ``S_k``) to its window and coarsen to the point budget."""
    d = F.density
    if d is None:
        return F
    extra = 0.0
    lo, hi = window(summand, k)
    i0 = max(int(math.floor((lo - d.origin) / d.step)), 0)
    i1 = min(int(math.ceil((hi - d.origin) / d.step)), d.size - 1)
    if i0 > 0 or i1 < d.size - 1:
        kept = d.window(i0, i1)
        extra += max(d.mass - kept.mass, 0.0)
        d = kept
    while d.size > plan.grid_points:
        d, e = resample(d, 2 * d.step, d.origin)
        extra += e
    plan.charge(extra)
    return MixtureDistribution(F.atomic, d, F.error_budget + extra)


def self_convolve(
    F: MixtureDistribution,
    n: int,
    grid_points: int = DEFAULT_GRID_POINTS,
    max_points: int = MAX_GRID_POINTS,
    max_atoms: int = MAX_ATOMS,
) -> MixtureDistribution:
    """Law of ``S_n``, the sum of ``n`` iid copies of ``F``.

    Exponentiation by squaring over :func:`convolve_pair`.  Intermediate
    laws are truncated to ``k*mean +- 12 sqrt(k) sd`` and coarsened by
    factors of two once they exceed ``grid_points`` nodes.  The purely
    atomic component is carried exactly with total mass ``atomic.total**n``.
    """
    if int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer, got {n}")
    n = int(n)
    if n == 1:
        return F
    if F.density is None:
        return MixtureDistribution(atomic_power(F.atomic, n, max_atoms), None, n * F.error_budget)
    plan = plan_convolution(F, n, grid_points)
    result, base = None, F
    r_count, b_count = 0, 1
    k = n
    while k:
        if k & 1:
            if result is None:
                result, r_count = base, b_count
            else:
                step = max(result.density.step, base.density.step)
                result = convolve_pair(result, base, step, max_points, max_atoms)
                r_count += b_count
                result = _fit_to_plan(result, r_count, F, plan)
        k >>= 1
        if k:
            base = convolve_pair(base, base, None, max_points, max_atoms)
            b_count *= 2
            base = _fit_to_plan(base, b_count, F, plan)
    return result
