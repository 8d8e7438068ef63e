from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from mimo_noma.densities import (f_marginal_asymptotic, f_marginal_pdf, f_ordered_pdf, f_support_edges,
                                 ks_distance, map_wishart_params, sample_f_eigenvalues, sample_wishart_eigenvalues,
                                 wishart_marginal_asymptotic, wishart_marginal_pdf)
from mimo_noma.errors import DimensionError, DomainError
from mimo_noma.ordered_reference import ordered_pdf


@pytest.mark.parametrize("shape, expected", [
    ((3, 3, 3), (3, 3, 3)), ((3, 3, 5), (3, 3, 1)), ((4, 2, 3), (3, 3, 2)), ((2, 4, 3), (3, 3, 2)),
    ((5, 4, 3), (5, 4, 3)), ((1, 4, 4), (4, 1, 1)),
])
def test_parameter_map(shape, expected):
    f = map_wishart_params(*shape)
    assert (f.mu1, f.mu2, f.nu) == expected


def test_parameter_map_rejects_underloaded():
    with pytest.raises(DimensionError):
        map_wishart_params(2, 2, 4)


def test_marginal_examples():
    assert f_marginal_pdf(3, 3, 1)(1.0) == pytest.approx(30 / 64, rel=1e-14)
    assert f_marginal_pdf(4, 1, 1)(0.0) == pytest.approx(4.0, rel=1e-14)
    assert f_marginal_pdf(3, 3, 2)(1.0) == pytest.approx(0.1875, rel=1e-14)
    with pytest.raises(DomainError):
        f_marginal_pdf(2, 3, 3)


def test_scalar_case_is_beta_prime():
    # one-dimensional F: ratio of Gamma(m2) to Gamma(m1) variables
    lam = sp.symbols("lam", positive=True)
    for m1, m2 in [(3, 3), (4, 2), (5, 7)]:
        ref = (lam ** (m2 - 1) / (1 + lam) ** (m1 + m2)
               * sp.factorial(m1 + m2 - 1) / (sp.factorial(m1 - 1) * sp.factorial(m2 - 1)))
        got = f_ordered_pdf(1, m1, m2, 1).as_sympy(lam)
        assert sp.simplify(got - ref) == 0
    # mean of the (3,3,1) law is m2 / (m1 - 1) = 3/2
    assert f_marginal_pdf(3, 3, 1).mean() == pytest.approx(1.5, rel=1e-12)


def test_sample_mean_of_scalar_ratio():
    lam = sample_f_eigenvalues(3, 3, 1, 100_000, seed=5).ravel()
    # the third moment of this law diverges, so the sample standard error is unreliable;
    # compare against the exact CDF instead
    d = f_marginal_pdf(3, 3, 1)
    assert ks_distance(lam, d.cdf) < 0.006
    assert np.median(sample_f_eigenvalues(1, 1, 1, 100_000, seed=6)) == pytest.approx(1.0, abs=0.02)


def test_ordered_examples():
    assert f_ordered_pdf(1, 3, 3, 2)(1.0) == pytest.approx(0.1875, rel=1e-14)
    assert f_ordered_pdf(4, 4, 4, 4)(0.0) == pytest.approx(16.0, rel=1e-14)
    assert f_ordered_pdf(2, 4, 4, 4)(1.0) == pytest.approx(16 * 2303 / 2**17, rel=1e-14)
    with pytest.raises(DomainError):
        f_ordered_pdf(3, 3, 3, 2)
    with pytest.raises(DomainError):
        f_ordered_pdf(1, 20, 20, 9)


def test_exact_coefficients_are_rational():
    d = f_ordered_pdf(2, 3, 3, 2)
    assert all(isinstance(c, Fraction) for c in d.exact_coefficients)
    # 12 lam (5 lam + 3) / (1 + lam)^9
    lam = sp.symbols("lam")
    assert sp.expand(d.as_sympy(lam) * (1 + lam) ** 9) == sp.expand(12 * lam * (5 * lam + 3))


@pytest.mark.parametrize("l", [1, 2, 3])
def test_ordered_density_matches_transcendental_route(l):
    xs = [0.05, 0.3, 1.0, 2.5, 9.0]
    ref = ordered_pdf(l, 5, 4, 3, xs, dps=30)
    got = f_ordered_pdf(l, 5, 4, 3).pdf(np.array(xs))
    assert np.allclose(got, ref, rtol=1e-10, atol=1e-14)


def test_ordered_densities_are_stochastically_ordered():
    x = np.geomspace(1e-3, 1e3, 60)
    cdfs = [f_ordered_pdf(l, 6, 5, 4).cdf(x) for l in range(1, 5)]
    for upper, lower in zip(cdfs, cdfs[1:]):
        assert np.all(upper <= lower + 1e-12)


@given(st.integers(1, 4).flatmap(lambda q: st.tuples(st.just(q), st.integers(q, 8), st.integers(q, 8))),
       st.lists(st.floats(0, 1e4), min_size=5, max_size=30))
def test_densities_are_nonnegative(params, xs):
    q, m1, m2 = params
    x = np.array(xs)
    assert np.all(f_marginal_pdf(m1, m2, q).pdf(x) >= 0)
    for l in range(1, q + 1):
        assert np.all(f_ordered_pdf(l, m1, m2, q).pdf(x) >= 0)


def test_cdf_limits_and_tail():
    d = f_marginal_pdf(5, 4, 2)
    assert d.cdf(0.0) == 0.0
    assert d.cdf(1e12) == pytest.approx(1.0, abs=1e-12)
    assert d.cdf(3.0) + d.sf(3.0) == pytest.approx(1.0, abs=1e-14)
    x = np.linspace(0.1, 20, 15)
    assert np.allclose(d.cdf(x), [d.expect(lambda _: 1.0, 0.0, v) for v in x], atol=1e-9)


def test_wishart_examples():
    w = wishart_marginal_pdf(1, 1)
    x = np.linspace(0, 10, 11)
    assert np.allclose(w.pdf(x), np.exp(-x), rtol=1e-14)
    assert wishart_marginal_pdf(3, 1).mean() == pytest.approx(3.0, rel=1e-14)
    for p, q in [(2, 2), (3, 2), (4, 3)]:
        assert wishart_marginal_pdf(p, q).integral() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        wishart_marginal_pdf(2, 3)


def test_wishart_mean_against_samples():
    lam = sample_wishart_eigenvalues(3, 1, 100_000, seed=3).ravel()
    se = lam.std() / np.sqrt(lam.size)
    assert abs(lam.mean() - 3.0) < 4 * se
    assert ks_distance(sample_wishart_eigenvalues(4, 3, 50_000, seed=4).ravel(),
                       wishart_marginal_pdf(4, 3).cdf) < 0.006


def test_asymptotic_f_support_and_normalization():
    lo, hi = f_support_edges(0.5, 0.5)
    assert lo == pytest.approx(0.0717967697, rel=1e-9) and hi == pytest.approx(13.9282032303, rel=1e-9)
    # equal ratios make the law invariant under lam -> 1/lam
    for rho in (0.2, 0.5, 0.8):
        lo, hi = f_support_edges(rho, rho)
        assert lo * hi == pytest.approx(1.0, rel=1e-12)
    for r1, r2 in [(0.5, 0.5), (0.25, 0.75), (0.6, 1.0)]:
        assert f_marginal_asymptotic(r1, r2).integral() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        f_marginal_asymptotic(1.0, 0.5)


def test_asymptotic_f_support_contains_large_samples():
    lo, hi = f_support_edges(0.5, 0.5)
    lam = sample_f_eigenvalues(64, 64, 32, 200, seed=8)
    # typical extremes of a finite draw sit at the edges; single draws fluctuate past them
    top, bottom = np.median(lam[:, 0]), np.median(lam[:, -1])
    assert lo - 0.1 < bottom and top < hi + 0.5
    # heavy right tail: at q = 32 the typical top eigenvalue still sits well inside the edge
    assert top > 0.7 * hi and bottom < 2 * lo


def test_asymptotic_f_tracks_finite_size_marginal():
    d = f_marginal_asymptotic(0.5, 0.5)
    lam = sample_f_eigenvalues(32, 32, 16, 4000, seed=2).ravel()
    assert ks_distance(lam, d.cdf) < 0.02


def test_marchenko_pastur():
    assert wishart_marginal_asymptotic(1.0, 4.0).support[0] == 0.0
    assert wishart_marginal_asymptotic(0.25, 8.0).support == pytest.approx((2.0, 18.0))
    assert wishart_marginal_asymptotic(0.5, 6.0).integral() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        wishart_marginal_asymptotic(1.5, 4.0)


def test_sampling_is_reproducible():
    a = sample_f_eigenvalues(3, 3, 2, 50, seed=1)
    assert np.array_equal(a, sample_f_eigenvalues(3, 3, 2, 50, seed=1))
    assert np.all(np.diff(a, axis=1) <= 0)


def test_ordered_histogram_sup_norm():
    lam = sample_f_eigenvalues(3, 3, 2, 100_000, seed=13)
    # unit bins keep the sampling noise of the peak bin near a third of the tolerance
    edges = np.arange(0.0, 13.0)
    for l in (1, 2):
        d = f_ordered_pdf(l, 3, 3, 2)
        counts, _ = np.histogram(lam[:, l - 1], bins=edges)
        emp = counts / (lam.shape[0] * np.diff(edges))
        exact = np.diff(d.cdf(edges)) / np.diff(edges)
        assert np.max(np.abs(emp - exact)) < 0.01


def test_concurrent_construction_shares_one_instance():
    with ThreadPoolExecutor(8) as pool:
        got = list(pool.map(lambda _: f_ordered_pdf(2, 6, 7, 4), range(16)))
    assert all(g is got[0] for g in got)
