"""Tweedie density/sampler contracts against closed forms and simulation."""

import math

import numpy as np
import pytest
from scipy import integrate

from carcasswatch.tweedie import (
    TweedieDomainError,
    TweedieParams,
    cdf,
    deviance,
    log_density,
    quantile,
    sample,
)


def test_zero_mass_closed_form():
    # lambda = mu^(2-p) / (sigma2 (2-p)); mu=1, p=1.5, sigma2=1 -> exactly -2
    assert log_density(0.0, TweedieParams(mu=1.0, p=1.5, sigma2=1.0)) == pytest.approx(
        -2.0, abs=1e-12
    )
    params = TweedieParams(mu=2.0, p=1.92, sigma2=0.437)
    lam = 2.0 ** (2 - 1.92) / (0.437 * (2 - 1.92))
    assert log_density(0.0, params) == pytest.approx(-lam, abs=1e-12)


def test_density_matches_monte_carlo_kernel_oracle():
    # Oracle first: box-kernel density at y=2 from 10^7 compound
    # Poisson-gamma draws (window +-0.02 keeps bias far below MC noise).
    params = TweedieParams(mu=1.5, p=1.92, sigma2=0.437)
    draws = sample(params, 10**7, rng=8)
    h = 0.02
    oracle = np.count_nonzero(np.abs(draws - 2.0) <= h) / (2 * h * len(draws))

    value = math.exp(log_density(2.0, params))
    assert value == pytest.approx(oracle, rel=0.02)


def test_poisson_limit_window_integral():
    # As p -> 1+, mass concentrates near integers; the (0.5, 1.5) window
    # integral converges to the Poisson(lambda) pmf at 1.
    eps = 1e-4
    params = TweedieParams(mu=1.0, p=1.0 + eps, sigma2=1.0)
    lam = 1.0 / (params.sigma2 * (2.0 - params.p))
    target = math.log(lam * math.exp(-lam))  # Poisson pmf at 1
    window, _ = integrate.quad(
        lambda y: math.exp(log_density(y, params)), 0.5, 1.5, limit=200
    )
    assert math.log(window) == pytest.approx(target, abs=1e-3)


def test_domain_errors():
    with pytest.raises(TweedieDomainError):
        TweedieParams(mu=1.0, p=2.3, sigma2=1.0)
    with pytest.raises(TweedieDomainError):
        TweedieParams(mu=-1.0, p=1.5, sigma2=1.0)
    with pytest.raises(TweedieDomainError):
        log_density(-0.5, TweedieParams(mu=1.0, p=1.5, sigma2=1.0))
    with pytest.raises(TweedieDomainError):
        log_density(float("nan"), TweedieParams(mu=1.0, p=1.5, sigma2=1.0))


def test_sample_mean_identity():
    params = TweedieParams(mu=2.0, p=1.5, sigma2=0.8)
    draws = sample(params, 10**6, rng=0)
    se = math.sqrt(0.8 * 2.0**1.5 / len(draws))
    assert abs(draws.mean() - 2.0) < 3 * se


def test_sample_variance_identity():
    params = TweedieParams(mu=2.0, p=1.5, sigma2=0.8)
    draws = sample(params, 10**6, rng=1)
    target = 0.8 * 2.0**1.5
    # SE of the sample variance from the empirical fourth moment
    centered = draws - draws.mean()
    se = math.sqrt((np.mean(centered**4) - target**2) / len(draws))
    assert abs(centered.var() - target) < 3 * se


def test_sample_zero_proportion_poisson_limit():
    params = TweedieParams(mu=2.0, p=1.0 + 1e-4, sigma2=1.0)
    lam = 2.0 ** (2 - params.p) / (params.sigma2 * (2 - params.p))
    draws = sample(params, 10**6, rng=2)
    p0 = math.exp(-lam)
    se = math.sqrt(p0 * (1 - p0) / len(draws))
    assert abs(np.mean(draws == 0.0) - math.exp(-2.0)) < 3 * se + abs(p0 - math.exp(-2.0))


def test_sample_deterministic_under_seed():
    params = TweedieParams(mu=2.0, p=1.7, sigma2=0.5)
    assert np.array_equal(sample(params, 100, rng=7), sample(params, 100, rng=7))


def test_deviance_zero_iff_equal():
    assert deviance(3.0, 3.0, 1.5) == 0.0
    assert deviance(2.0, 3.0, 1.5) > 0.0


def test_deviance_at_zero_closed_form():
    # 2 mu^(2-p) / (2-p) at y=0; mu=1, p=1.5 -> 4
    assert deviance(0.0, 1.0, 1.5) == pytest.approx(4.0, abs=1e-12)


def test_deviance_matches_quadrature_oracle():
    # Oracle first: unit deviance d(y, mu) = 2 int_mu^y (y - t) / t^p dt.
    rng = np.random.default_rng(5)
    for _ in range(12):
        y = float(rng.uniform(0.2, 6.0))
        mu = float(rng.uniform(0.2, 6.0))
        p = float(rng.uniform(1.05, 1.95))
        oracle, _ = integrate.quad(lambda t: 2 * (y - t) / t**p, mu, y)
        assert deviance(y, mu, p) == pytest.approx(oracle, abs=1e-8)


@pytest.mark.parametrize("mu", [0.5, 1.0, 4.0])
@pytest.mark.parametrize("p", [1.2, 1.5, 1.92])
@pytest.mark.parametrize("sigma2", [0.437, 1.0, 2.0])
def test_normalization(mu, p, sigma2):
    # zero atom + continuous quadrature over (0, inf) = 1 within 1e-6
    params = TweedieParams(mu=mu, p=p, sigma2=sigma2)
    zero_mass = math.exp(log_density(0.0, params))
    f = lambda y: math.exp(log_density(y, params))
    # quad rejects break points on infinite intervals, so split at 10*mu
    body, _ = integrate.quad(f, 0.0, 10 * mu, limit=400, points=[1e-9, mu])
    tail, _ = integrate.quad(f, 10 * mu, np.inf, limit=200)
    assert zero_mass + body + tail == pytest.approx(1.0, abs=1e-6)


def test_truncation_window_monotone():
    # Widening the series window beyond the default changes nothing above
    # the dropped-tail tolerance.
    params = TweedieParams(mu=1.5, p=1.92, sigma2=0.437)
    for y in (0.1, 1.0, 7.5, 120.0):
        base = log_density(y, params, tail_logdrop=30.0)
        wide = log_density(y, params, tail_logdrop=80.0)
        assert abs(wide - base) <= math.exp(-30.0) + 1e-15


def test_continuity_in_p():
    # No jumps: adjacent evaluations at a tiny step stay within 1e-6.
    h = 1e-9
    for y in (0.5, 2.0, 40.0):
        for p in np.linspace(1.01, 1.99, 25):
            a = log_density(y, TweedieParams(mu=1.5, p=float(p), sigma2=0.7))
            b = log_density(y, TweedieParams(mu=1.5, p=float(p) + h, sigma2=0.7))
            assert abs(b - a) < 1e-6


def test_cdf_quantile_round_trip():
    params = TweedieParams(mu=2.0, p=1.6, sigma2=0.9)
    for level in (0.2, 0.5, 0.9):
        q = quantile(level, params)
        assert cdf(q, params) == pytest.approx(level, abs=1e-8)


def test_sampler_matches_integrated_cdf():
    # Kolmogorov-Smirnov distance below 0.005 at 10^6 draws.
    params = TweedieParams(mu=1.5, p=1.92, sigma2=0.437)
    draws = np.sort(sample(params, 10**6, rng=3))
    grid = np.quantile(draws, np.linspace(0.02, 0.98, 49))
    theo = np.array([cdf(g, params) for g in grid])
    emp = np.searchsorted(draws, grid, side="right") / len(draws)
    assert np.max(np.abs(emp - theo)) < 0.005
