"""Minorization of ``F * F`` by a shifted triangular density.

For a non-singular ``F`` with bounded sub-density ``f0``, the self-convolution
``f0 * f0`` is continuous, so it stays above half its peak ``b`` on some
interval ``[u - v, u + v]``.  A tent of half-width ``a <= v`` and height ``b``
centred at ``u`` then lies below ``F * F``, which gives

    F * F = (1 - theta) H2 + theta (kappa_a shifted by u),   theta = a b.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convolve import convolve_pair, pl_convolve
from .distkit import (
    AtomicMeasure,
    GridDensity,
    MixtureDistribution,
    add_on_lattice,
    l1_distance,
)
from .errors import ShrinkExhausted, SingularInput, ZeroDensity

NEG_TOL = 1e-12
LEVEL_TOL = 1e-13
MAX_SHRINKS = 40
SPIKE_QUANTILE = 99.9
SPIKE_FACTOR = 100.0


@dataclass(frozen=True)
class DecompositionCertificate:
    u: float
    v: float
    b: float
    theta: float
    a: float
    residual: MixtureDistribution
    reconstruction_l1: float
    residual_min: float
    # True when a = sqrt(v/b) would have exceeded v and a was capped
    a_capped: bool = False
    shrinks: int = 0


def extract_subdensity(F: MixtureDistribution) -> GridDensity:
    """A bounded, compactly supported sub-density of the a.c. part of ``F``.

    Grid densities already have compact support.  Isolated spikes far above
    the bulk of the samples are capped at the 99.9th percentile.
    """
    d = F.density
    if d is None or d.mass <= 0:
        raise SingularInput("law has no absolutely continuous part")
    pos = np.concatenate((d.values, d.right))
    pos = pos[pos > 0]
    cap = float(np.percentile(pos, SPIKE_QUANTILE))
    if pos.max() <= SPIKE_FACTOR * cap:
        return d
    capped = GridDensity(d.origin, d.step, np.minimum(d.values, cap), np.minimum(d.right, cap))
    if capped.mass < 0.9 * d.mass:
        return d
    return capped


def find_peak_level_set(f2: GridDensity) -> tuple[float, float, float]:
    """Peak location ``u``, half-width ``v`` of the level set ``{f2 >= b}``, and ``b``.

    ``u`` is the smallest grid argmax; ``v`` is a whole number of grid steps.
    """
    vals = np.minimum(f2.values, f2.right)
    peak_vals = np.maximum(f2.values, f2.right)
    i = int(np.argmax(peak_vals))
    peak = float(peak_vals[i])
    if peak <= 0:
        raise ZeroDensity("density is identically zero")
    b = peak / 2
    ok = vals >= b * (1 - LEVEL_TOL)
    k = 0
    while i - k - 1 >= 0 and i + k + 1 < f2.size and ok[i - k - 1] and ok[i + k + 1]:
        k += 1
    return f2.origin + i * f2.step, k * f2.step, b


def _tent(u: float, a: float, height: float, step: float) -> GridDensity:
    k = int(round(a / step))
    vals = height * (1 - np.abs(np.arange(-k, k + 1)) / k)
    return GridDensity(u - k * step, step, vals)


def build_certificate(F: MixtureDistribution) -> DecompositionCertificate:
    f0 = extract_subdensity(F)
    f2 = pl_convolve(f0, f0)[0]
    F2 = convolve_pair(F, F)
    D = F2.density
    h = f2.step
    u, v, b = find_peak_level_set(f2)
    offset = (u - D.origin) / h
    if abs(offset - round(offset)) > 1e-6 or not math.isclose(h, D.step):
        raise ShrinkExhausted("peak of f0*f0 is not on the lattice of F*F")
    iu = int(round(offset))
    v_steps = int(round(v / h))
    for shrink in range(MAX_SHRINKS + 1):
        if v_steps < 4:
            raise ShrinkExhausted(f"level-set half-width fell below four grid steps (v = {v_steps * h})")
        v = v_steps * h
        a_raw = math.sqrt(v / b)
        a_steps = min(v_steps, int(math.floor(a_raw / h + 1e-9)))
        if a_steps >= 1:
            a = a_steps * h
            theta = a * b
            tent = _tent(0.0, a, b, h)
            lo, hi = iu - a_steps, iu + a_steps + 1
            if lo >= 0 and hi <= D.size:
                left = D.values.copy()
                right = D.right.copy()
                left[lo:hi] -= tent.values
                right[lo:hi] -= tent.right
                # the tent is zero outside its support; restore one-sided limits at its ends
                left[lo] += tent.values[0]
                right[hi - 1] += tent.right[-1]
                rmin = float(min(left.min(), right.min()))
                if rmin >= -NEG_TOL and theta <= 1:
                    break
        v_steps //= 2
    else:
        raise ShrinkExhausted(f"no valid residual after {MAX_SHRINKS} shrinks")
    res_density = GridDensity(D.origin, h, np.maximum(left, 0.0), np.maximum(right, 0.0))
    scale = 1.0 - theta
    if scale > 0:
        residual = MixtureDistribution(
            AtomicMeasure(F2.atomic.locations, F2.atomic.masses / scale, F2.atomic.pruned / scale),
            res_density.scaled(1 / scale),
            F2.error_budget / scale,
        )
    else:
        residual = MixtureDistribution()
    shifted = _tent(u, a, b, h)
    rebuilt = add_on_lattice([res_density, shifted])
    recon = l1_distance(D, rebuilt)
    return DecompositionCertificate(
        u=u,
        v=v,
        b=b,
        theta=theta,
        a=a,
        residual=residual,
        reconstruction_l1=recon,
        residual_min=rmin,
        a_capped=a_raw > v,
        shrinks=shrink,
    )


def _sample_density(d: GridDensity, rng: np.random.Generator, count: int) -> np.ndarray:
    # exact inverse CDF of the piecewise-linear density
    h = d.step
    r, l = d.right[:-1], d.values[1:]
    pieces = 0.5 * h * (r + l)
    cum = np.cumsum(pieces)
    target = rng.random(count) * cum[-1]
    i = np.minimum(np.searchsorted(cum, target, side="right"), len(pieces) - 1)
    rest = target - (cum[i] - pieces[i])
    slope = (l[i] - r[i]) / h
    disc = np.sqrt(np.maximum(r[i] ** 2 + 2 * slope * rest, 0.0))
    denom = r[i] + disc
    t = np.divide(2 * rest, denom, out=np.zeros_like(rest), where=denom > 0)
    return d.origin + i * h + np.clip(t, 0.0, h)


def sample_mixture(F: MixtureDistribution, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` samples from a normalized mixture law."""
    atoms = F.atomic.masses
    w_atoms = float(atoms.sum())
    w_ac = F.ac_weight
    total = w_atoms + w_ac
    from_atoms = rng.random(count) * total < w_atoms
    out = np.empty(count)
    k = int(from_atoms.sum())
    if k:
        out[from_atoms] = rng.choice(F.atomic.locations, size=k, p=atoms / w_atoms)
    if count - k:
        out[~from_atoms] = _sample_density(F.density, rng, count - k)
    return out


def sample_representation(cert: DecompositionCertificate, seed: int, count: int) -> np.ndarray:
    """Samples of ``(X1 + u) X3 + X2 (1 - X3)`` with ``X1 ~ kappa_a``, ``X2 ~ H2``, ``X3 ~ Bernoulli(theta)``."""
    count = int(count)
    rng = np.random.default_rng(seed)
    if count == 0:
        return np.empty(0)
    x3 = rng.random(count) < cert.theta
    out = np.empty(count)
    k = int(x3.sum())
    out[x3] = cert.a * (rng.random(k) - rng.random(k)) + cert.u
    if count - k:
        out[~x3] = sample_mixture(cert.residual, rng, count - k)
    return out
