import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from mmcoal import measures as M

from .conftest import ALL_MEASURES


def quadrature_rate(measure, n, k):
    """Direct numerical integration of x^(k-2) (1-x)^(n-k) against Lambda."""
    if isinstance(measure, M.Kingman):
        return 1.0 if k == 2 else 0.0
    if isinstance(measure, M.Dirac):
        x = measure.p
        return x ** (k - 2) * (1 - x) ** (n - k)
    if isinstance(measure, M.EldonWakeley):
        x = measure.psi
        return measure.kingman_weight * (k == 2) + measure.dirac_weight * x ** (k - 2) * (1 - x) ** (n - k)
    a, b = measure.a, measure.b
    val, _ = integrate.quad(
        lambda x: x ** (k - 2) * (1 - x) ** (n - k),
        0, 1, weight="alg", wvar=(a - 1, b - 1), epsabs=0, epsrel=1e-13, limit=200,
    )
    return val / special.beta(a, b)


def test_examples():
    assert M.merger_rate(M.Kingman(), 7, 2) == 1.0
    assert M.merger_rate(M.Kingman(), 7, 3) == 0.0
    assert M.merger_rate(M.BolthausenSznitman(), 3, 2) == pytest.approx(0.5, rel=1e-12)
    assert M.merger_rate(M.BolthausenSznitman(), 3, 3) == pytest.approx(0.5, rel=1e-12)
    alpha = M.beta_from_alpha(1.5)
    assert (alpha.a, alpha.b) == (0.5, 1.5)
    assert M.merger_rate(alpha, 3, 2) == pytest.approx(0.75, rel=1e-12)
    assert M.merger_rate(alpha, 3, 3) == pytest.approx(0.25, rel=1e-12)
    assert M.merger_rate(M.Dirac(0.3), 4, 3) == pytest.approx(0.21, rel=1e-12)


@pytest.mark.parametrize("n,k", [(1, 2), (5, 1), (5, 6)])
def test_merger_rate_bad_range(n, k):
    with pytest.raises(ValueError):
        M.merger_rate(M.Kingman(), n, k)


def test_transition_examples():
    tr = M.transition_distribution(M.Kingman(), 5)
    assert tr.total_rate == pytest.approx(10.0)
    assert tr.prob(2) == 1.0 and tr.probs[1:].sum() == 0.0
    tr = M.transition_distribution(M.BolthausenSznitman(), 3)
    assert tr.total_rate == pytest.approx(2.0)
    np.testing.assert_allclose(tr.probs, [0.75, 0.25], rtol=1e-12)
    tr = M.transition_distribution(M.Dirac(0.3), 4)
    assert tr.total_rate == pytest.approx(3.87, rel=1e-12)
    np.testing.assert_allclose(tr.probs, [2.94 / 3.87, 0.84 / 3.87, 0.09 / 3.87], rtol=1e-12)
    np.testing.assert_allclose(tr.probs, [0.7597, 0.2171, 0.0233], atol=1e-4)


@pytest.mark.parametrize("measure", ALL_MEASURES, ids=str)
@pytest.mark.parametrize("n", [2, 3, 7, 20, 50])
def test_rates_match_quadrature(measure, n):
    for k in range(2, n + 1):
        expected = quadrature_rate(measure, n, k)
        got = M.merger_rate(measure, n, k)
        assert got == pytest.approx(expected, rel=1e-8, abs=0 if expected else 1e-300)


@pytest.mark.parametrize("measure", ALL_MEASURES, ids=str)
def test_rate_consistency(measure):
    for n in range(2, 50):
        lo = np.exp(measure.log_rates(n))
        hi = np.exp(measure.log_rates(n + 1))
        assert np.all(lo >= 0)
        np.testing.assert_allclose(hi[:-1] + hi[1:], lo, rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("measure", ALL_MEASURES, ids=str)
@pytest.mark.parametrize("n", [2, 10, 100, 10_000])
def test_probabilities_sum_to_one(measure, n):
    tr = M.transition_distribution(measure, n)
    assert abs(tr.probs.sum() - 1.0) <= 1e-12
    assert np.isfinite(tr.total_rate) and tr.total_rate > 0


def test_dust_profiles():
    d = M.dust_profile(M.Dirac(0.5))
    assert (d.mu_minus_one, d.has_dust, d.gamma) == (2.0, True, 0.5)
    d = M.dust_profile(M.Kingman())
    assert d.mu_minus_one == math.inf and not d.has_dust and d.gamma is None
    d = M.dust_profile(M.Beta(1.5, 0.5))
    assert d.mu_minus_one == pytest.approx(2.0) and d.gamma == pytest.approx(0.5)
    assert not M.dust_profile(M.BolthausenSznitman()).has_dust
    assert not M.dust_profile(M.EldonWakeley(0.3)).has_dust
    assert not M.dust_profile(M.Beta(0.5, 1.5)).has_dust


@pytest.mark.parametrize("a,b", [(1.5, 0.5), (2.5, 1.0), (3.0, 2.0)])
def test_beta_dust_constant_by_quadrature(a, b):
    val, _ = integrate.quad(lambda x: 1.0, 0, 1, weight="alg", wvar=(a - 2, b - 1))
    assert M.dust_profile(M.Beta(a, b)).mu_minus_one == pytest.approx(val / special.beta(a, b), rel=1e-9)


def test_bsz_is_beta_one_one():
    bsz, beta = M.BolthausenSznitman(), M.Beta(1.0, 1.0)
    np.testing.assert_array_equal(bsz.log_rates(30), beta.log_rates(30))
    assert M.beta_from_alpha(1.0) == bsz


@pytest.mark.parametrize("measure", ALL_MEASURES, ids=str)
def test_dict_round_trip(measure):
    assert M.measure_from_dict(measure.to_dict()) == measure


def test_dict_alpha_and_errors():
    assert M.measure_from_dict({"family": "beta", "params": {"alpha": 1.2}}) == M.Beta(0.8, 1.2)
    with pytest.raises(ValueError):
        M.measure_from_dict({"family": "nope"})
    with pytest.raises(ValueError):
        M.Dirac(1.0)
    with pytest.raises(ValueError):
        M.Beta(0.0, 1.0)
    with pytest.raises(ValueError):
        M.EldonWakeley(0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(2, 200))
def test_dirac_probs_match_binomial_form(p, n):
    tr = M.transition_distribution(M.Dirac(p), n)
    k = np.arange(2, n + 1)
    w = special.comb(n, k) * p ** (k - 2) * (1 - p) ** (n - k)
    np.testing.assert_allclose(tr.probs, w / w.sum(), rtol=1e-9, atol=1e-300)
