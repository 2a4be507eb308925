import numpy as np
import pytest
from scipy.integrate import trapezoid

from tvclt.dichotomy import Branch, delta_series, fit_rate, fit_series
from tvclt.distkit import bernoulli, gaussian, grid, mixture, point_mass, uniform
from tvclt.errors import InsufficientPoints, InvalidParameter, MixedBranch

N = tuple(2**k for k in range(2, 11))


def test_synthetic_power_law():
    n = np.array(N, dtype=float)
    fit = fit_rate(n, 0.3 * n**-0.5)
    assert fit.branch is Branch.CONVERGING
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.c_hat == pytest.approx(0.3, rel=1e-12)
    assert fit.dropped == N[:2]


def test_degenerate_branch():
    fit = fit_rate(N, np.ones(len(N)))
    assert fit.branch is Branch.DEGENERATE_TV_ONE and fit.slope is None


def test_mixed_branch():
    d = np.ones(len(N))
    d[-1] = 0.5
    with pytest.raises(MixedBranch):
        fit_rate(N, d)


def test_validation():
    with pytest.raises(InvalidParameter):
        fit_rate([4, 2, 8], [0.1, 0.1, 0.1])
    with pytest.raises(InvalidParameter):
        fit_rate([2, 4], [0.1])
    with pytest.raises(InsufficientPoints):
        fit_rate([2, 4, 8, 16, 32], [0.5, 0.3, 0.2, 0.1, 0.05])
    with pytest.raises(InvalidParameter):
        delta_series(uniform(), [])


def test_gaussian_series_is_noise():
    for r in delta_series(gaussian(), N, grid_points=4096):
        assert r.value <= r.tolerance + 1e-9


def test_uniform_series_decreases():
    reps = delta_series(uniform(), N)
    d = [r.value for r in reps]
    assert all(b < a for a, b in zip(d, d[1:]))
    fit = fit_series(N, reps)
    assert fit.branch is Branch.CONVERGING
    assert fit.slope <= -0.5


def test_series_is_ordered_and_deterministic():
    a = delta_series(uniform(), N[:4], threads=4)
    b = delta_series(uniform(), N[:4], threads=1)
    assert [r.value for r in a] == [r.value for r in b]


def test_dichotomy_consistency():
    assert fit_series(N, delta_series(bernoulli(0.5), N)).branch is Branch.DEGENERATE_TV_ONE
    thin = mixture([(0.5, point_mass(0.0)), (0.5, uniform(intervals=512))])
    fit = fit_series(N, delta_series(thin, N, grid_points=4096))
    assert fit.branch is Branch.CONVERGING


@pytest.mark.parametrize("alpha", [0.5, 0.8])
def test_singular_floor(alpha):
    F = mixture([(1 - alpha, bernoulli(0.5)), (alpha, uniform(intervals=512))])
    for n, r in zip(N[:4], delta_series(F, N[:4], grid_points=4096)):
        assert r.value >= (1 - alpha) ** n - r.tolerance


def test_skewed_summand_has_root_n_rate():
    # density 2x on [0,1]; leading Edgeworth term |skew|/(6 sqrt n) * (1/2) int |He3 phi|
    ramp = grid(0.0, 1 / 4096, np.linspace(0, 2, 4097))
    x = np.linspace(-12, 12, 400_001)
    phi = np.exp(-x * x / 2) / np.sqrt(2 * np.pi)
    c = (2 * np.sqrt(2) / 5) / 6 * 0.5 * trapezoid(np.abs(x**3 - 3 * x) * phi, x)
    reps = delta_series(ramp, N)
    fit = fit_series(N, reps)
    assert -0.6 <= fit.slope <= -0.45
    assert reps[-1].value * np.sqrt(N[-1]) == pytest.approx(c, rel=0.01)
