"""Tweedie compound Poisson-gamma distribution for p in (1, 2).

The observation model for weekly carcass counts: a Poisson number of
mortality events, each contributing a gamma-distributed animal tally,
giving positive probability mass at zero and a continuous density on
(0, inf) with variance sigma2 * mu^p.

Everything is computed in log space; the infinite series for the
continuous density is truncated adaptively around its dominating index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import gammainc, gammaln, logsumexp

TAIL_LOGDROP = 37.0  # series terms this far below the peak are negligible
_BLOCK = 32
_MAX_INDEX = 200_000


class TweedieDomainError(ValueError):
    """Parameter or argument outside the supported Tweedie domain."""


@dataclass(frozen=True)
class TweedieParams:
    """Mean / power / dispersion triple with p strictly inside (1, 2)."""

    mu: float
    p: float
    sigma2: float

    def __post_init__(self):
        for name, value in (("mu", self.mu), ("p", self.p), ("sigma2", self.sigma2)):
            if not np.isfinite(value):
                raise TweedieDomainError(f"{name} must be finite, got {value!r}")
        if self.mu <= 0:
            raise TweedieDomainError(f"mu must be positive, got {self.mu}")
        if not 1.0 < self.p < 2.0:
            raise TweedieDomainError(f"p must lie in (1, 2), got {self.p}")
        if self.sigma2 <= 0:
            raise TweedieDomainError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def poisson_rate(self) -> float:
        """lambda: expected number of compounding events."""
        return self.mu ** (2.0 - self.p) / (self.sigma2 * (2.0 - self.p))

    @property
    def gamma_shape(self) -> float:
        return (2.0 - self.p) / (self.p - 1.0)

    @property
    def gamma_scale(self) -> float:
        return self.sigma2 * (self.p - 1.0) * self.mu ** (self.p - 1.0)


def _as_array(y) -> tuple[np.ndarray, bool]:
    arr = np.asarray(y, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _log_series_block(j: np.ndarray, y: np.ndarray, p: float, sigma2: float) -> np.ndarray:
    """log W_j for positive y (column) against index block j (row)."""
    alpha = (2.0 - p) / (p - 1.0)
    ja = j * alpha
    return (
        ja * np.log(y)[:, None]
        - ja * np.log(p - 1.0)
        - j * (1.0 + alpha) * np.log(sigma2)
        - j * np.log(2.0 - p)
        - gammaln(j + 1.0)
        - gammaln(ja)
    )


def log_series_sum(y, p: float, sigma2: float, tail_logdrop: float = TAIL_LOGDROP):
    """log sum_j W_j(y) over j >= 1 for y > 0, vectorized over y.

    W_j is unimodal in j with peak near y^(2-p) / (sigma2 (2-p)); blocks
    of indices are appended on the right until every element's terms have
    fallen `tail_logdrop` below its running peak.  (Index 1 is the exact
    left edge, so only the right tail needs a stopping rule.)
    """
    y_arr, scalar = _as_array(y)
    if np.any(y_arr <= 0):
        raise TweedieDomainError("series sum requires y > 0")

    peak = np.max(y_arr) ** (2.0 - p) / (sigma2 * (2.0 - p))
    hi = max(int(np.ceil(peak)) + _BLOCK, _BLOCK)
    j = np.arange(1, hi + 1, dtype=float)
    terms = _log_series_block(j, y_arr, p, sigma2)
    best = terms.max(axis=1)
    while np.any(terms[:, -1] > best - tail_logdrop):
        if j[-1] > _MAX_INDEX:
            raise TweedieDomainError("series truncation index exceeded limit")
        j_new = np.arange(j[-1] + 1, j[-1] + 1 + _BLOCK, dtype=float)
        block = _log_series_block(j_new, y_arr, p, sigma2)
        terms = np.concatenate([terms, block], axis=1)
        best = np.maximum(best, block.max(axis=1))
        j = np.concatenate([j, j_new])
    out = logsumexp(terms, axis=1)
    return float(out[0]) if scalar else out


def log_density(y, params: TweedieParams, tail_logdrop: float = TAIL_LOGDROP):
    """log f(y) with the exact point mass at zero.

    For y > 0:  log f = log sum W_j - log y + theta-tilt / sigma2 with
    tilt = y mu^(1-p)/(1-p) - mu^(2-p)/(2-p).
    """
    y_arr, scalar = _as_array(y)
    if np.any(~np.isfinite(y_arr)) or np.any(y_arr < 0):
        raise TweedieDomainError("y must be finite and non-negative")

    mu, p, sigma2 = params.mu, params.p, params.sigma2
    tilt = (
        y_arr * mu ** (1.0 - p) / (1.0 - p) - mu ** (2.0 - p) / (2.0 - p)
    ) / sigma2

    out = np.empty_like(y_arr)
    zero = y_arr == 0
    out[zero] = -params.poisson_rate
    if np.any(~zero):
        pos = y_arr[~zero]
        out[~zero] = (
            log_series_sum(pos, p, sigma2, tail_logdrop)
            - np.log(pos)
            + tilt[~zero]
        )
    return float(out[0]) if scalar else out


def eta_derivatives(y, mu, p: float, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    """First derivative and curvature weight of log f in eta = log mu.

    Returns (d1, w) with d1 = (y - mu) mu^(1-p) / sigma2 and
    w = -d2 = mu^(1-p) ((p-1) y + (2-p) mu) / sigma2, which is >= 0 for
    p in (1, 2), so the Newton Hessian stays negative semi-definite.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    base = mu ** (1.0 - p) / sigma2
    d1 = (y - mu) * base
    w = ((p - 1.0) * y + (2.0 - p) * mu) * base
    return d1, w


def deviance(y, mu, p: float):
    """Tweedie unit deviance; zero iff y = mu."""
    y_arr, scalar = _as_array(y)
    mu_arr = np.broadcast_to(np.asarray(mu, dtype=float), y_arr.shape)
    if not 1.0 < p < 2.0:
        raise TweedieDomainError(f"p must lie in (1, 2), got {p}")
    term_mu = mu_arr ** (2.0 - p) / (2.0 - p)
    term_cross = y_arr * mu_arr ** (1.0 - p) / (1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        term_y = np.where(
            y_arr > 0,
            y_arr ** np.float64(2.0 - p) / ((1.0 - p) * (2.0 - p)),
            0.0,
        )
    out = 2.0 * (term_y - term_cross + term_mu)
    out = np.maximum(out, 0.0)  # clip -0.0 / rounding at y == mu
    return float(out[0]) if scalar else out


def sample(params: TweedieParams, size: int, rng: np.random.Generator | int | None = None):
    """Compound Poisson-gamma draws, deterministic under a fixed seed."""
    if size < 1:
        raise TweedieDomainError("size must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n_events = rng.poisson(params.poisson_rate, size=size)
    out = np.zeros(size)
    positive = n_events > 0
    out[positive] = rng.gamma(
        shape=n_events[positive] * params.gamma_shape,
        scale=params.gamma_scale,
    )
    return out


def _poisson_log_weights(lam: float, tail_logdrop: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices j >= 1 and log Poisson(j; lam) weights above the drop cutoff."""
    hi = max(int(np.ceil(lam)) + _BLOCK, _BLOCK)
    while True:
        j = np.arange(1.0, hi + 1.0)
        logw = -lam + j * np.log(lam) - gammaln(j + 1.0)
        if logw[-1] <= logw.max() - tail_logdrop or hi > _MAX_INDEX:
            break
        hi += _BLOCK
    keep = logw > logw.max() - tail_logdrop
    return j[keep], logw[keep]


def cdf(y, params: TweedieParams, tail_logdrop: float = TAIL_LOGDROP):
    """F(y) = e^{-lam} + sum_j Poisson(j; lam) GammaCDF(y; j alpha, scale)."""
    y_arr, scalar = _as_array(y)
    lam = params.poisson_rate
    j, logw = _poisson_log_weights(lam, tail_logdrop)
    w = np.exp(logw)
    shapes = j * params.gamma_shape
    out = np.full(y_arr.shape, np.nan)
    out[y_arr < 0] = 0.0
    nonneg = y_arr >= 0
    if np.any(nonneg):
        g = gammainc(shapes[None, :], y_arr[nonneg, None] / params.gamma_scale)
        out[nonneg] = np.exp(-lam) + g @ w
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def quantile(level, params: TweedieParams):
    """Smallest y with F(y) >= level; 0 inside the zero atom."""
    levels, scalar = _as_array(level)
    if np.any((levels <= 0) | (levels >= 1)):
        raise TweedieDomainError("quantile levels must lie in (0, 1)")
    zero_mass = np.exp(-params.poisson_rate)
    out = np.zeros(levels.shape)
    for i, q in enumerate(levels):
        if q <= zero_mass:
            continue
        hi = params.mu + 10.0 * np.sqrt(params.sigma2 * params.mu ** params.p)
        while cdf(hi, params) < q:
            hi *= 2.0
        # invert in log space: relative precision survives even when the
        # distribution is concentrated at arbitrarily small magnitudes
        z_hi = np.log(hi)
        z_lo = z_hi
        while cdf(np.exp(z_lo), params) >= q and z_lo > -750.0:
            z_lo -= 2.5
        out[i] = np.exp(
            optimize.brentq(
                lambda z: cdf(np.exp(z), params) - q, z_lo, z_hi, xtol=1e-10
            )
        )
    return float(out[0]) if scalar else out
