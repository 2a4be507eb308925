"""Sums of iid triangular variables.

``kappa_a`` is the tent density of half-width ``a``; its characteristic
function is ``k(as)`` with ``k(s) = 2(1 - cos s)/s**2``.  The density of the
sum of ``n`` copies is recovered by Fourier inversion,

    g_n(x) = 1/(a pi) int_0^inf cos(s x / a) k(s)**n ds,

integrated with Gauss-Legendre panels aligned to the periods of ``cos s``.
Beyond ``2 pi K`` the integrand is expanded as a cosine polynomial over
``s**(2n)`` and each term is integrated exactly through ``Si``/``Ci``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb, sici

from .errors import InvalidParameter, QuadratureNonconvergence

QUAD_TOL = 1e-10
TAIL_TOL = 1e-13
MAX_PERIODS = 8
MAX_NODES = 4096
_TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class TriangularSumLaw:
    a: float
    n: int

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidParameter(f"half-width must be positive, got {self.a}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))


def _kernel(s) -> np.ndarray:
    # 2(1 - cos s)/s^2 = sinc(s / 2pi)^2 without cancellation near 0
    return np.sinc(np.asarray(s, dtype=np.float64) / _TWO_PI) ** 2


def char_fn(law: TriangularSumLaw, s) -> np.ndarray | float:
    out = _kernel(law.a * np.asarray(s, dtype=np.float64)) ** law.n
    return float(out) if np.ndim(out) == 0 else out


def _periods(n: int) -> tuple[int, bool]:
    """Number of 2pi panels, and whether an explicit tail is still needed."""
    for K in range(1, MAX_PERIODS + 1):
        if _tail_bound(n, _TWO_PI * K, 0) < TAIL_TOL:
            return K, False
    return MAX_PERIODS, True


def _tail_bound(n: int, S: float, extra: int) -> float:
    # int_S^inf (4/s^2)^n s^-extra ds
    p = 2 * n + extra
    return math.exp(n * math.log(4) + (1 - p) * math.log(S) - math.log(p - 1))


@lru_cache(maxsize=64)
def _gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(m)


def _panel_integral(fn, K: int, m: int) -> float:
    x, w = _gauss_legendre(m)
    lo = _TWO_PI * np.arange(K)[:, None]
    s = lo + math.pi * (x[None, :] + 1)
    return float(math.pi * np.sum(w[None, :] * fn(s)))


def _oscillatory_power_tails(omega: float, S: float, pmax: int) -> tuple[np.ndarray, np.ndarray]:
    """``int_S^inf cos(omega s) s^-p ds`` and the sine analogue for p = 1..pmax."""
    C = np.zeros(pmax + 1)
    Sn = np.zeros(pmax + 1)
    if omega == 0:
        for p in range(2, pmax + 1):
            C[p] = S ** (1 - p) / (p - 1)
        return C, Sn
    si, ci = sici(omega * S)
    C[1], Sn[1] = -ci, math.pi / 2 - si
    c, s = math.cos(omega * S), math.sin(omega * S)
    for p in range(2, pmax + 1):
        q = S ** (1 - p) / (p - 1)
        C[p] = c * q - omega / (p - 1) * Sn[p - 1]
        Sn[p] = s * q + omega / (p - 1) * C[p - 1]
    return C, Sn


def _tail(n: int, S: float, freq: float, sine: bool) -> float:
    """``int_S^inf trig(freq s) k(s)^n s^-extra ds`` by exact term integration.

    ``(2 - 2cos s)^n = C(2n,n) + 2 sum_j (-1)^j C(2n,n-j) cos(js)``.
    For the sine case an extra ``1/s`` factor is included.
    """
    extra = 1 if sine else 0
    p = 2 * n + extra
    total = 0.0
    coeffs = [(0, comb(2 * n, n, exact=True))]
    coeffs += [(j, 2 * (-1) ** j * comb(2 * n, n - j, exact=True)) for j in range(1, n + 1)]
    for j, c in coeffs:
        for omega, sign in ((abs(freq - j), math.copysign(1.0, freq - j)), (freq + j, 1.0)):
            Cp, Sp = _oscillatory_power_tails(omega, S, p)
            # cos(fs)cos(js) = (cos((f-j)s) + cos((f+j)s))/2, sin alike
            total += 0.5 * c * (sign * Sp[p] if sine else Cp[p])
    return total


def _inversion(n: int, freq: float, sine: bool) -> float:
    """``int_0^inf trig(freq s) k(s)^n [1/s] ds`` to absolute error QUAD_TOL."""
    K, need_tail = _periods(n)

    if sine:
        def fn(s):
            return np.sin(freq * s) / s * _kernel(s) ** n
    else:
        def fn(s):
            return np.cos(freq * s) * _kernel(s) ** n

    m = 16 + 2 * int(math.ceil(abs(freq)))
    prev = _panel_integral(fn, K, m)
    while True:
        m *= 2
        if m > MAX_NODES:
            raise QuadratureNonconvergence(f"inversion integral did not converge for n={n}, freq={freq}")
        cur = _panel_integral(fn, K, m)
        if abs(cur - prev) < 0.1 * QUAD_TOL:
            break
        prev = cur
    if need_tail:
        cur += _tail(n, _TWO_PI * K, freq, sine)
    return cur


def density_at(law: TriangularSumLaw, x) -> np.ndarray | float:
    """``g_n(x)`` by Fourier inversion; zero outside ``[-n a, n a]``."""
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(xs)
    for i, xi in enumerate(xs):
        y = abs(xi) / law.a
        if y < law.n:
            out[i] = max(_inversion(law.n, y, False) / (law.a * math.pi), 0.0)
    return float(out[0]) if np.ndim(x) == 0 else out


def peak_bound(law: TriangularSumLaw) -> float:
    """``(1/a)(sqrt(3/(pi n)) + 2/((2n-1) pi^(2n)))``, an upper bound on ``g_n(0)``."""
    n = law.n
    log_second = math.log(2) - math.log(2 * n - 1) - 2 * n * math.log(math.pi)
    second = math.exp(log_second) if log_second > math.log(1e-300) else 0.0
    return (math.sqrt(3 / (math.pi * n)) + second) / law.a


def shift_tv_exact(law: TriangularSumLaw, gamma: float) -> float:
    """``d_TV(T_n, T_n + gamma) = int_{-gamma/2}^{gamma/2} g_n``.

    Integrating the inversion formula over the window in ``x`` first gives
    ``(2/pi) int_0^inf sin(s gamma / 2a) / s k(s)^n ds``.
    """
    if gamma < 0:
        raise InvalidParameter(f"gamma must be nonnegative, got {gamma}")
    if gamma == 0:
        return 0.0
    c = gamma / (2 * law.a)
    if c >= law.n:
        return 1.0
    value = 2 / math.pi * _inversion(law.n, c, True)
    return min(max(value, 0.0), 1.0)


def lemma1_bound(a: float, n: int, gamma: float) -> float:
    """``(gamma/a)(sqrt(3/(pi n)) + 2/((2n-1) pi^(2n)))``; not clamped."""
    if gamma < 0:
        raise InvalidParameter(f"gamma must be nonnegative, got {gamma}")
    return gamma * peak_bound(TriangularSumLaw(a, n))


def verify_cosine_inequality(samples: int) -> bool:
    """Check ``0 <= 2(1 - cos s)/s^2 <= exp(-s^2/12)`` on a uniform grid of [0, 2pi]."""
    if samples < 2:
        raise InvalidParameter("need at least two samples")
    s = np.linspace(0.0, _TWO_PI, int(samples))
    lhs = _kernel(s)
    rhs = np.exp(-s * s / 12)
    # one ulp of slack where both sides round to 1 near s = 0
    return bool(np.all(lhs >= 0) and np.all(lhs <= rhs + np.finfo(float).eps))

