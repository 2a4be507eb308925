import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from tvclt.convolve import convolve_pair
from tvclt.distkit import (
    affine,
    bernoulli,
    gaussian,
    mixture,
    point_mass,
    triangular,
    uniform,
)
from tvclt.errors import InvalidParameter
from tvclt.triangular import TriangularSumLaw, shift_tv_exact
from tvclt.tvmetric import (
    DistanceKind,
    cdf,
    kolmogorov_distance,
    shift_tv,
    tv_distance,
    tv_to_matched_normal,
    tv_to_normal,
)


def random_mixture(rng):
    parts = []
    k = rng.integers(0, 3)
    for _ in range(k):
        parts.append(point_mass(float(np.round(rng.uniform(-1, 1), 3))))
    lo = float(rng.uniform(-1, 0))
    parts.append(uniform(lo, lo + float(rng.uniform(0.5, 2)), intervals=256))
    if rng.random() < 0.5:
        parts.append(triangular(float(rng.uniform(0.3, 1.5)), float(rng.uniform(-0.5, 0.5)), intervals=256))
    w = rng.dirichlet(np.ones(len(parts)))
    w[-1] = 1 - w[:-1].sum()
    return mixture(list(zip(w, parts)))


def test_identical_laws():
    for F in (uniform(), gaussian(), bernoulli(0.3), mixture([(0.5, point_mass(0)), (0.5, uniform())])):
        assert tv_distance(F, F).value == 0.0
        assert kolmogorov_distance(F, F).value == 0.0


def test_atom_against_density_is_one():
    r = tv_distance(point_mass(0.0), gaussian())
    assert r.value == 1.0 and r.tolerance == 0.0


def test_shifted_normals():
    r = tv_distance(gaussian(0, 1), gaussian(1, 1))
    exact = 2 * norm.cdf(0.5) - 1
    ref = 0.5 * quad(lambda x: abs(norm.pdf(x) - norm.pdf(x, 1)), -20, 20, points=[0.5])[0]
    assert exact == pytest.approx(ref, abs=1e-12)
    assert abs(r.value - exact) <= r.tolerance + 1e-9


def test_atoms_match_by_location():
    assert tv_distance(bernoulli(0.5), bernoulli(0.25)).value == pytest.approx(0.25)
    assert tv_distance(point_mass(0.0), point_mass(1e-13)).value == 0.0
    assert tv_distance(point_mass(0.0), point_mass(1e-9)).value == 1.0


def test_unnormalized_input_rejected():
    F = uniform().scaled(0.5)
    with pytest.raises(InvalidParameter):
        tv_distance(F, uniform())


def test_gaussian_delta_is_zero():
    for n in (1, 3, 16):
        r = tv_to_matched_normal(gaussian(), n)
        assert r.value <= 1e-9 + r.tolerance


def test_bernoulli_delta_is_one():
    for n in (1, 2, 7, 40):
        assert tv_to_matched_normal(bernoulli(0.5), n).value == 1.0


def test_uniform_two_fold_against_quadrature():
    ih2 = lambda x: max(0.0, 1 - abs(x - 1))  # noqa: E731
    sd = math.sqrt(1 / 6)
    ref = 0.5 * quad(lambda x: abs(ih2(x) - norm.pdf(x, 1, sd)), -8, 10, points=[0, 1, 2], limit=400)[0]
    r = tv_to_matched_normal(uniform(), 2)
    assert abs(r.value - ref) <= r.tolerance + 1e-9


def test_tv_to_normal_of_own_samples():
    F = gaussian(2.0, 3.0)
    assert tv_to_normal(F, 2.0, 3.0).value < 1e-12
    with pytest.raises(InvalidParameter):
        tv_to_normal(F, 0.0, 0.0)


def test_shift_tv_examples():
    assert shift_tv(uniform(), 4, 0.0).value == 0.0
    assert shift_tv(point_mass(2.0), 5, 0.1).value == 1.0
    with pytest.raises(InvalidParameter):
        shift_tv(uniform(), 2, -1.0)


@pytest.mark.parametrize("n,gamma", [(1, 0.3), (2, 0.1), (4, 0.5), (9, 1.0)])
def test_shift_tv_matches_triangular_inversion(n, gamma):
    r = shift_tv(triangular(1.0), n, gamma)
    exact = shift_tv_exact(TriangularSumLaw(1.0, n), gamma)
    assert abs(r.value - exact) <= r.tolerance + 1e-9


def test_kolmogorov_examples():
    r = kolmogorov_distance(point_mass(0.0), point_mass(1.0))
    assert r.value == 1.0 and r.kind is DistanceKind.KOLMOGOROV
    # sup |x - x^2/2 ...| for U(0,1) vs triangle on [0,1] peaked at 1/2
    k = kolmogorov_distance(uniform(0, 1), triangular(0.5, 0.5)).value
    assert k == pytest.approx(0.125, abs=1e-9)


def test_cdf_limits():
    F = mixture([(0.5, point_mass(0.0)), (0.5, uniform())])
    assert cdf(F, 0.0) == pytest.approx(0.5)
    assert cdf(F, 0.0, left=True) == 0.0
    assert cdf(F, 0.5) == pytest.approx(0.75)
    assert cdf(F, 3.0) == pytest.approx(1.0)


def test_kolmogorov_dominated_by_tv_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(100):
        F, G = random_mixture(rng), random_mixture(rng)
        k, t = kolmogorov_distance(F, G), tv_distance(F, G)
        assert k.value <= t.value + k.tolerance + t.tolerance + 1e-12


def test_symmetry_and_triangle_inequality():
    rng = np.random.default_rng(5)
    for _ in range(30):
        F, G, H = (random_mixture(rng) for _ in range(3))
        fg, gf = tv_distance(F, G), tv_distance(G, F)
        assert fg.value == gf.value
        fh, gh = tv_distance(F, H), tv_distance(G, H)
        assert fh.value <= fg.value + gh.value + 2 * max(fg.tolerance, fh.tolerance, gh.tolerance) + 1e-12


def test_convolution_contraction():
    rng = np.random.default_rng(11)
    for _ in range(15):
        F, G, H = (random_mixture(rng) for _ in range(3))
        before = tv_distance(F, G)
        FH, GH = convolve_pair(F, H), convolve_pair(G, H)
        after = tv_distance(FH, GH)
        assert after.value <= before.value + before.tolerance + after.tolerance + 1e-12


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(0.2, 5.0) | st.floats(-5.0, -0.2), shift=st.floats(-10, 10))
def test_affine_invariance(scale, shift):
    F = mixture([(0.2, point_mass(0.5)), (0.8, uniform(intervals=256))])
    G = mixture([(0.1, point_mass(0.5)), (0.9, triangular(0.5, 0.5, intervals=256))])
    base = tv_distance(F, G).value
    moved = tv_distance(affine(F, scale, shift), affine(G, scale, shift)).value
    assert moved == pytest.approx(base, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_singular_floor(alpha):
    F = mixture([(1 - alpha, bernoulli(0.5)), (alpha, uniform(intervals=512))])
    for n in (1, 2, 4, 8):
        r = tv_to_matched_normal(F, n, grid_points=1024)
        assert r.value >= (1 - alpha) ** n - r.tolerance
