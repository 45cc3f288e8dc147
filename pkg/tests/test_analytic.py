import math

import numpy as np
import pytest
from scipy import stats

from oracles import ks_distance, series_cdf, top_sum_samples
from schcn.analytic import (RateParams, SchcnCdf, build_schcn_cdf, fer_asymptotic, fer_closed_form,
                            lambda_eq_bounds, relay_link_cdf, schcn_cdf_asymptotic, schcn_cdf_eval)
from schcn.errors import DegenerateRates
from schcn.threshold import BPSK, snr_threshold_proposed


def _cdf(n, n_c, l0, le):
    return build_schcn_cdf(n, n_c, RateParams(l0, le))


@pytest.mark.parametrize("n,n_c,l0,le", [
    (1, 1, 0.7, 1.9), (2, 1, 1.0, 0.4), (3, 2, 2.5, 1.3), (4, 4, 0.3, 0.8),
    (5, 2, 1.7, 0.6), (5, 5, 4.0, 1.1), (3, 1, 1.0, 1.0), (4, 2, 2.0, 2.0),
])
def test_closed_form_matches_series_oracle(n, n_c, l0, le):
    cdf = _cdf(n, n_c, l0, le)
    for g in (0.05, 0.4, 1.0, 2.5):
        g = g / max(l0, le) * 2
        assert schcn_cdf_eval(cdf, g) == pytest.approx(series_cdf(n, n_c, l0, le, g), rel=1e-9, abs=1e-15)


def test_two_exponential_convolution():
    # N = N_c = 1: gamma_0 + gamma_1 with distinct rates
    a, b = 0.7, 1.9
    cdf = _cdf(1, 1, a, b)
    g = np.linspace(0.01, 8, 30)
    ref = 1 - (b * np.exp(-a * g) - a * np.exp(-b * g)) / (b - a)
    np.testing.assert_allclose(schcn_cdf_eval(cdf, g), ref, rtol=1e-12)


@pytest.mark.parametrize("n,k", [(1, 2), (2, 3)])
def test_equal_rates_full_selection_is_erlang(n, k):
    lam = 1.3
    cdf = _cdf(n, n, lam, lam)
    assert cdf.case == "equal"
    g = np.linspace(0.0, 10, 41)
    np.testing.assert_allclose(schcn_cdf_eval(cdf, g), stats.gamma.cdf(g, k, scale=1 / lam), rtol=1e-11, atol=1e-15)


@pytest.mark.parametrize("n,n_c,l0,le", [(3, 2, 1.0, 1.3), (5, 1, 3.0, 0.5), (4, 3, 1.2, 1.2), (2, 2, 0.2, 5.0)])
def test_laplace_reassembly(n, n_c, l0, le, rng):
    cdf = _cdf(n, n_c, l0, le)
    for s in rng.uniform(0.01, 20, 20):
        prod = cdf.laplace_product(s)
        assert float(cdf.laplace_partial_fractions(s)) == pytest.approx(prod, rel=1e-8)


@pytest.mark.parametrize("n,n_c,l0,le", [(3, 2, 1.0, 1.3), (5, 3, 0.4, 2.2), (4, 4, 2.0, 2.0), (2, 1, 3.3, 0.9)])
def test_matches_monte_carlo(n, n_c, l0, le, rng):
    size = 200_000
    x = np.sort(top_sum_samples(n, n_c, l0, le, size, rng))
    f = schcn_cdf_eval(_cdf(n, n_c, l0, le), x, rtol=1e-6)
    assert ks_distance(f, size) < 0.005


def test_cdf_axioms():
    cdf = _cdf(4, 2, 1.1, 0.7)
    g = np.concatenate([[0.0], np.logspace(-4, 2.5, 300)])
    f = schcn_cdf_eval(cdf, g)
    assert f[0] == 0.0
    assert np.all(np.diff(f) >= -1e-15)
    assert np.all((f >= 0) & (f <= 1))
    assert f[-1] == pytest.approx(1.0, abs=1e-12)
    # pdf is the derivative of the cdf
    x, h = 1.7, 1e-5
    assert cdf.pdf(x) == pytest.approx((schcn_cdf_eval(cdf, x + h) - schcn_cdf_eval(cdf, x - h)) / (2 * h), rel=1e-6)


def test_small_gamma_uses_extended_precision():
    cdf = _cdf(5, 2, 1.0, 1.0001)
    g = 1e-4
    ref = series_cdf(5, 2, 1.0, 1.0001, g)
    assert schcn_cdf_eval(cdf, g) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("n,n_c", [(1, 1), (2, 1), (3, 2), (4, 4), (5, 3)])
def test_asymptote_ratio(n, n_c):
    rates = RateParams(1.5, 0.8)
    g = 1e-3 / 1.5
    ratio = schcn_cdf_eval(build_schcn_cdf(n, n_c, rates), g) / schcn_cdf_asymptotic(n, n_c, rates, g)
    assert 0.98 <= ratio <= 1.02


def test_asymptotic_fer_is_monomial_in_snr():
    # every rate scales as 1/snr, so the asymptote falls by exactly N+1 decades per decade
    n, n_c = 3, 2
    vals = [fer_asymptotic(n, n_c, RateParams(1 / m, 2 / m)) for m in (1e2, 1e3)]
    assert math.log10(vals[0] / vals[1]) == pytest.approx(n + 1, abs=1e-12)


def test_closed_form_fer_converges_to_asymptote():
    n, n_c = 3, 3
    gaps = []
    for db in (15, 25, 35):
        m = 10 ** (db / 10)
        r = RateParams(1 / m, 2 / m)
        gaps.append(abs(math.log10(fer_closed_form(n, n_c, r) / fer_asymptotic(n, n_c, r))))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.01


def test_direct_only_fer():
    r = RateParams(0.01, 0.02)
    assert fer_closed_form(0, 0, r) == pytest.approx(-math.expm1(-0.01 * snr_threshold_proposed(1)))


def test_degenerate_inputs():
    with pytest.raises(ValueError):
        build_schcn_cdf(3, 0, RateParams(1, 1))
    with pytest.raises(ValueError):
        build_schcn_cdf(2, 3, RateParams(1, 1))
    with pytest.raises(DegenerateRates):
        build_schcn_cdf(11, 2, RateParams(1, 2))
    # lambda_0 landing on the (1 + 1/N_c) lambda_eq pole
    with pytest.raises(DegenerateRates):
        build_schcn_cdf(3, 2, RateParams(1.5, 1.0))


def test_distinct_case_converges_linearly_to_equal_case():
    lam = 1.3
    equal = build_schcn_cdf(3, 2, RateParams(lam, lam))
    g = np.linspace(0.05, 8, 60)
    fe = schcn_cdf_eval(equal, g)
    gaps = []
    for delta in (1e-3, 1e-4, 2e-6):
        near = SchcnCdf(3, 2, RateParams(lam * (1 + delta), lam), "distinct")
        gaps.append(np.max(np.abs(schcn_cdf_eval(near, g) - fe)) / delta)
    # the gap is first order in delta with a bounded constant
    assert max(gaps) < 0.5
    assert gaps[0] == pytest.approx(gaps[-1], rel=0.01)


def test_relay_link_cdf_and_bounds():
    r = RateParams.from_links(0.1, 0.2, 0.3)
    gt1 = snr_threshold_proposed(1)
    assert relay_link_cdf(0.5 * gt1, r) == pytest.approx(-math.expm1(-0.5 * 0.5 * gt1))
    assert relay_link_cdf(2 * gt1, r) == pytest.approx(-math.expm1(-0.2 * gt1 - 0.3 * 2 * gt1))
    lo, hi = lambda_eq_bounds(r, 4)
    assert lo < hi == pytest.approx(0.5)
    assert RateParams.from_links(0.1, 0.2, 0.3, mode="lower", d=4).lambda_eq == pytest.approx(lo)
