import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from tvclt.convolve import convolve_pair
from tvclt.distkit import triangular
from tvclt.errors import InvalidParameter
from tvclt.triangular import (
    TriangularSumLaw,
    char_fn,
    density_at,
    lemma1_bound,
    peak_bound,
    shift_tv_exact,
    verify_cosine_inequality,
)



def _irwin_hall_cdf(y, m):
    y = mp.mpf(y)
    if y <= 0:
        return mp.mpf(0)
    if y >= m:
        return mp.mpf(1)
    s = sum((-1) ** k * mp.binomial(m, k) * (y - k) ** m for k in range(int(mp.floor(y)) + 1))
    return s / mp.factorial(m)


def _irwin_hall_pdf(y, m):
    y = mp.mpf(y)
    if y <= 0 or y >= m:
        return mp.mpf(0)
    s = sum((-1) ** k * mp.binomial(m, k) * (y - k) ** (m - 1) for k in range(int(mp.floor(y)) + 1))
    return s / mp.factorial(m - 1)


def g_exact(x, n, a):
    # T_n / a + n is Irwin-Hall with 2n summands; the alternating sum cancels heavily
    with mp.workdps(400):
        return float(_irwin_hall_pdf(mp.mpf(x) / a + n, 2 * n) / a)


def shift_exact(gamma, n, a):
    with mp.workdps(400):
        c = mp.mpf(gamma) / (2 * a)
        return float(_irwin_hall_cdf(c + n, 2 * n) - _irwin_hall_cdf(n - c, 2 * n))


def test_char_fn_examples():
    assert char_fn(TriangularSumLaw(1, 1), 0.0) == 1.0
    assert char_fn(TriangularSumLaw(1, 1), math.pi) == pytest.approx(4 / math.pi**2, rel=1e-14)
    assert char_fn(TriangularSumLaw(1, 2), 2 * math.pi) == pytest.approx(0.0, abs=1e-30)


def test_char_fn_range_and_parity():
    s = np.linspace(-40, 40, 2001)
    for law in (TriangularSumLaw(0.5, 1), TriangularSumLaw(2, 7)):
        v = char_fn(law, s)
        assert np.all((v >= 0) & (v <= 1))
        assert np.allclose(v, char_fn(law, -s), atol=0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 12, 30, 50])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_density_matches_irwin_hall(n, a):
    for x in (0.0, 0.37 * a, 1.3 * a, 0.5 * n * a):
        assert density_at(TriangularSumLaw(a, n), x) == pytest.approx(g_exact(x, n, a), abs=1e-10)


def test_density_examples():
    assert density_at(TriangularSumLaw(1, 1), 0.0) == pytest.approx(1.0, abs=1e-10)
    conv = convolve_pair(triangular(1.0), triangular(1.0)).density
    assert density_at(TriangularSumLaw(1, 2), 0.0) == pytest.approx(conv.evaluate(0.0), abs=1e-8)
    assert density_at(TriangularSumLaw(1, 2), 5.0) == 0.0


def test_density_symmetric_and_unimodal():
    law = TriangularSumLaw(1.0, 5)
    x = np.linspace(0, 5, 41)
    v = density_at(law, x)
    assert np.allclose(v, density_at(law, -x), atol=1e-14)
    assert np.all(v <= v[0] + 1e-12)
    assert np.all(np.diff(v) <= 1e-12)


@pytest.mark.parametrize("n", [1, 3, 10])
def test_density_integrates_to_one(n):
    law = TriangularSumLaw(1.0, n)
    x, w = np.polynomial.legendre.leggauss(64)
    # the density is a spline with knots at the integers
    total = 0.0
    for k in range(-n, n):
        total += 0.5 * np.dot(w, density_at(law, k + 0.5 * (x + 1)))
    assert total == pytest.approx(1.0, abs=1e-8)


def test_peak_bound_examples():
    assert peak_bound(TriangularSumLaw(1, 1)) == pytest.approx(math.sqrt(3 / math.pi) + 2 / math.pi**2, rel=1e-14)
    assert peak_bound(TriangularSumLaw(2, 1)) == pytest.approx(peak_bound(TriangularSumLaw(1, 1)) / 2, rel=1e-15)
    assert peak_bound(TriangularSumLaw(1, 100)) == pytest.approx(math.sqrt(3 / (100 * math.pi)), rel=1e-15)
    assert peak_bound(TriangularSumLaw(1, 1)) == pytest.approx(1.17985, abs=1e-5)


def test_peak_bound_second_term_flushes():
    # 2/((2n-1) pi^(2n)) underflows long before n = 400
    assert peak_bound(TriangularSumLaw(1, 400)) == math.sqrt(3 / (400 * math.pi))


def test_peak_bound_dominates_peak():
    for n in range(1, 30):
        law = TriangularSumLaw(1.0, n)
        assert density_at(law, 0.0) <= peak_bound(law)


def test_lemma1_bound_examples():
    assert lemma1_bound(1, 1, 0) == 0.0
    assert lemma1_bound(1, 1, 1) == pytest.approx(peak_bound(TriangularSumLaw(1, 1)))
    expected = 0.2 * (math.sqrt(3 / (6 * math.pi)) + 2 / (11 * math.pi**12))
    assert lemma1_bound(0.5, 6, 0.1) == pytest.approx(expected, rel=1e-14)
    assert lemma1_bound(0.5, 6, 0.1) == pytest.approx(0.079788, abs=1e-6)
    assert lemma1_bound(0.1, 1, 5.0) > 1  # a bound, not clamped


def test_shift_tv_exact_examples():
    law = TriangularSumLaw(1.0, 1)
    assert shift_tv_exact(law, 0.0) == 0.0
    assert shift_tv_exact(law, 1.0) == pytest.approx(0.75, abs=1e-10)
    assert shift_tv_exact(law, 2.0) == 1.0
    assert shift_tv_exact(law, 3.0) == 1.0
    with pytest.raises(InvalidParameter):
        shift_tv_exact(law, -0.1)


@pytest.mark.parametrize("n", [1, 2, 5, 9, 25, 50])
def test_shift_tv_exact_matches_irwin_hall(n):
    for a in (0.5, 2.0):
        for gamma in (0.01, 0.1, 1.0, 3.0):
            assert shift_tv_exact(TriangularSumLaw(a, n), gamma) == pytest.approx(
                shift_exact(gamma, n, a), abs=1e-10
            )


def test_shift_tv_exact_monotone_in_gamma():
    law = TriangularSumLaw(1.0, 4)
    vals = [shift_tv_exact(law, g) for g in np.linspace(0, 9, 37)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_closed_form_n1_window():
    # (gamma/a)(1 - gamma/(4a)) for gamma <= 2a
    for gamma in (0.2, 0.9, 1.7):
        expected = Fraction(gamma).limit_denominator(1000)
        expected = float(expected * (1 - expected / 4))
        assert shift_tv_exact(TriangularSumLaw(1.0, 1), gamma) == pytest.approx(expected, abs=1e-10)


def test_cosine_inequality():
    assert verify_cosine_inequality(10**4)
    assert verify_cosine_inequality(2)
    with pytest.raises(InvalidParameter):
        verify_cosine_inequality(1)


def test_law_validation():
    with pytest.raises(InvalidParameter):
        TriangularSumLaw(0.0, 1)
    with pytest.raises(InvalidParameter):
        TriangularSumLaw(1.0, 0)
