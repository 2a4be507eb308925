"""Upper bound on ``d_TV(S_n, S_n + gamma)`` through the binomial mixture.

Write ``S_{2m}`` as a sum of ``m`` copies of ``F * F`` and use the
certificate ``F * F = (1 - theta) H2 + theta kappa_a(. - u)``.  With
``I ~ Binomial(m, theta)`` triangular pieces and ``k0 = floor(m theta / 2)``,

    d_TV(S_n, S_n + gamma) <= d_TV(T_k0, T_k0 + gamma) + P(I <= k0 - 1),

and the first term is bounded in closed form by the triangular module.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .convolve import DEFAULT_GRID_POINTS
from .decompose import DecompositionCertificate, build_certificate
from .distkit import MixtureDistribution
from .errors import InvalidParameter
from .triangular import lemma1_bound
from .tvmetric import shift_tv


class DegenerateBoundWarning(UserWarning):
    """k0 = 0: the triangular term is vacuous and the bound is at least 1."""


@dataclass(frozen=True)
class ShiftBoundBreakdown:
    m: int
    theta: float
    k0: int
    triangular_term: float
    binomial_tail: float
    total: float


def binomial_tail_cdf(m: int, theta: float, k: int) -> float:
    """``P(Binomial(m, theta) <= k)`` summed in log space."""
    if not 0 <= theta <= 1:
        raise InvalidParameter(f"theta must lie in [0, 1], got {theta}")
    if m < 0:
        raise InvalidParameter(f"m must be nonnegative, got {m}")
    if k < 0:
        return 0.0
    if k >= m:
        return 1.0
    if theta == 0:
        return 1.0
    if theta == 1:
        return 0.0
    j = np.arange(k + 1)
    logpmf = (
        gammaln(m + 1) - gammaln(j + 1) - gammaln(m - j + 1)
        + j * math.log(theta) + (m - j) * math.log1p(-theta)
    )
    return float(min(math.exp(logsumexp(logpmf)), 1.0))


def lemma3_bound(
    F: MixtureDistribution, n: int, gamma: float, cert: DecompositionCertificate | None = None
) -> ShiftBoundBreakdown:
    if n < 2:
        raise InvalidParameter(f"n must be at least 2, got {n}")
    if gamma < 0:
        raise InvalidParameter(f"gamma must be nonnegative, got {gamma}")
    if cert is None:
        cert = build_certificate(F)
    m = n // 2
    k0 = int(math.floor(0.5 * m * cert.theta))
    if k0 >= 1:
        tri = lemma1_bound(cert.a, k0, gamma)
    else:
        warnings.warn(f"k0 = 0 for m = {m}, theta = {cert.theta}; bound is vacuous", DegenerateBoundWarning)
        tri = 1.0
    tail = binomial_tail_cdf(m, cert.theta, k0 - 1)
    return ShiftBoundBreakdown(m, cert.theta, k0, tri, tail, tri + tail)


def verify_contraction_chain(
    F: MixtureDistribution, n: int, gamma: float, grid_points: int = DEFAULT_GRID_POINTS
) -> bool:
    """``shift_tv(F, n, gamma) <= shift_tv(F, 2 floor(n/2), gamma)`` within tolerance."""
    if n < 2:
        raise InvalidParameter(f"n must be at least 2, got {n}")
    lhs = shift_tv(F, n, gamma, grid_points)
    if n % 2 == 0:
        return True
    rhs = shift_tv(F, n - 1, gamma, grid_points)
    return lhs.value <= rhs.value + lhs.tolerance + rhs.tolerance
