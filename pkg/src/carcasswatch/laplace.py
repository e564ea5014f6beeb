"""Laplace-approximation fitting pipeline.

Inner loop: Newton optimization of the latent field given hyperparameters,
exploiting the sparse precision Q + B'WB.  Outer loop: derivative-free
simplex optimization of the hyperparameter posterior approximated by the
Laplace marginal likelihood.  Marginals come from the Gaussian
approximation at the joint mode (no skew correction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize, sparse
from scipy import special as sc

from carcasswatch.ingest import SPECIES_GROUPS, VALID_REGIONS
from carcasswatch.linalg import CholeskyFactor, FactorizationError
from carcasswatch.model import Hyperparameters, ModelParts, ModelSpec, SpecError

Z_80 = 1.2815515655446004  # standard normal 0.90 quantile
_BASELINE_GROUP = "BI"
_BASELINE_REGION = 1


class ModeError(RuntimeError):
    """Newton iteration failed to reach the requested gradient norm."""

    def __init__(self, message: str, gradient_norm: float):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class InitializationError(RuntimeError):
    """Outer optimization objective is not finite at the starting point."""


@dataclass(frozen=True)
class PosteriorSummary:
    name: str
    mean: float
    sd: float
    q10: float
    q50: float
    q90: float
    mode: float
    significant: bool

    def __post_init__(self):
        if self.sd < 0:
            raise SpecError(f"{self.name}: sd must be non-negative")
        if not self.q10 <= self.q50 <= self.q90:
            raise SpecError(f"{self.name}: quantiles out of order")


@dataclass(frozen=True)
class HyperOptResult:
    hyper_mode: Hyperparameters
    curvature: np.ndarray  # negative-log-marginal Hessian, unconstrained scale
    log_marginal: float
    n_evaluations: int
    converged: bool


@dataclass
class FittedState:
    """Mode-centered Gaussian approximation, reusable across queries."""

    hyper: Hyperparameters
    spec: ModelSpec
    mode: np.ndarray
    hessian: sparse.csc_matrix
    factor: CholeskyFactor
    iterations: int

    _marginal_sd: np.ndarray | None = None

    def marginal_sd(self) -> np.ndarray:
        if self._marginal_sd is None:
            self._marginal_sd = np.sqrt(self.factor.inverse_diagonal())
        return self._marginal_sd

    def eta_moments(self, row: int) -> tuple[float, float]:
        """Posterior mean and sd of the linear predictor for one design row."""
        b = np.asarray(self.spec.design.getrow(row).todense()).ravel()
        mean = float(b @ self.mode)
        var = float(b @ self.factor.solve(b))
        return mean, math.sqrt(max(var, 0.0))


def _gaussian_prior_logpdf(x: np.ndarray, Q: sparse.csc_matrix, logdet: float) -> float:
    n = Q.shape[0]
    return float(-0.5 * n * math.log(2.0 * math.pi) + 0.5 * logdet - 0.5 * x @ (Q @ x))


def joint_log_density(
    latent: np.ndarray, hyper: Hyperparameters, spec: ModelSpec
) -> float:
    """Likelihood + latent Gaussian prior + hyperprior, fully normalized."""
    latent = np.asarray(latent, dtype=float)
    if latent.shape != (spec.n_latent,):
        raise SpecError(
            f"latent has shape {latent.shape}, expected ({spec.n_latent},)"
        )
    Q = spec.prior_matrix(hyper)
    logdet = CholeskyFactor(Q).log_det()
    lik = spec.likelihood_builder(hyper, spec.y)
    eta = spec.design @ latent
    return (
        lik.log_lik(eta)
        + _gaussian_prior_logpdf(latent, Q, logdet)
        + spec.hyperprior(hyper)
    )


def find_mode(
    hyper: Hyperparameters,
    spec: ModelSpec,
    init: np.ndarray | None = None,
    tol: float = 1e-6,
    max_iters: int = 100,
) -> tuple[np.ndarray, sparse.csc_matrix, int]:
    """Newton with backtracking line search on the penalized log-likelihood.

    Returns the latent mode, the sparse negative Hessian Q + B'WB at the
    mode, and the iteration count.
    """
    state = _fit_latent(hyper, spec, init=init, tol=tol, max_iters=max_iters)
    return state.mode, state.hessian, state.iterations


def _fit_latent(
    hyper: Hyperparameters,
    spec: ModelSpec,
    init: np.ndarray | None = None,
    tol: float = 1e-6,
    max_iters: int = 150,
) -> FittedState:
    Q = spec.prior_matrix(hyper)
    lik = spec.likelihood_builder(hyper, spec.y)
    B = spec.design
    Bt = B.T.tocsr()
    x = np.zeros(spec.n_latent) if init is None else np.array(init, dtype=float)
    if x.shape != (spec.n_latent,):
        raise SpecError(f"init has shape {x.shape}, expected ({spec.n_latent},)")

    def objective(vec: np.ndarray, eta: np.ndarray) -> float:
        return lik.log_lik(eta) - 0.5 * float(vec @ (Q @ vec))

    eta = B @ x
    f_curr = objective(x, eta)
    if not np.isfinite(f_curr):
        raise ModeError("joint log density not finite at init", float("inf"))

    gnorm = float("inf")
    for iteration in range(max_iters + 1):
        d1, w = lik.derivatives(eta)
        grad = Bt @ d1 - Q @ x
        gnorm = float(np.max(np.abs(grad)))
        H = (Q + Bt @ sparse.diags(np.maximum(w, 0.0)) @ B).tocsc()
        if gnorm < tol:
            return FittedState(
                hyper=hyper,
                spec=spec,
                mode=x,
                hessian=H,
                factor=CholeskyFactor(H),
                iterations=iteration,
            )
        if iteration == max_iters:
            break
        factor = CholeskyFactor(H)
        delta = factor.solve(grad)
        slope = float(grad @ delta)
        # Newton decrement: remaining objective gap is ~slope/2, so a tiny
        # slope means the mode is resolved to float precision even when the
        # max-gradient test cannot be met.
        if slope < 1e-9 * (1.0 + abs(f_curr) * 1e-3):
            return FittedState(
                hyper=hyper,
                spec=spec,
                mode=x,
                hessian=H,
                factor=factor,
                iterations=iteration,
            )
        step = 1.0
        while step >= 2.0**-40:
            x_try = x + step * delta
            eta_try = B @ x_try
            f_try = objective(x_try, eta_try)
            if np.isfinite(f_try) and f_try >= f_curr + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            if slope < 1e-7 * (1.0 + abs(f_curr) * 1e-3):
                # objective noise floor reached with a negligible gap left
                return FittedState(
                    hyper=hyper,
                    spec=spec,
                    mode=x,
                    hessian=H,
                    factor=factor,
                    iterations=iteration,
                )
            raise ModeError(
                f"line search stalled at iteration {iteration}", gnorm
            )
        x, eta, f_curr = x_try, eta_try, f_try
    raise ModeError(
        f"no convergence after {max_iters} iterations (|grad| = {gnorm:.3e})",
        gnorm,
    )


def log_marginal_hyper(
    hyper: Hyperparameters,
    spec: ModelSpec,
    init: np.ndarray | None = None,
    mode_out: dict | None = None,
) -> float:
    """Laplace approximation to log p(theta | y) up to a constant.

    `mode_out`, when given, receives the latent mode under key "mode" so
    callers can warm-start subsequent evaluations.
    """
    state = _fit_latent(hyper, spec, init=init)
    Q = spec.prior_matrix(hyper)
    logdet_q = CholeskyFactor(Q).log_det()
    lik = spec.likelihood_builder(hyper, spec.y)
    joint = (
        lik.log_lik(spec.design @ state.mode)
        + _gaussian_prior_logpdf(state.mode, Q, logdet_q)
        + spec.hyperprior(hyper)
    )
    if mode_out is not None:
        mode_out["mode"] = state.mode
    return (
        joint
        + 0.5 * spec.n_latent * math.log(2.0 * math.pi)
        - 0.5 * state.factor.log_det()
    )


def optimize_hyper(
    spec: ModelSpec,
    init: Hyperparameters,
    max_evaluations: int = 400,
    xatol: float = 2e-3,
    fatol: float = 1e-3,
    fd_step: float = 0.05,
    init_latent: np.ndarray | None = None,
    simplex_step: float = 0.35,
) -> HyperOptResult:
    """Nelder-Mead on the 8 unconstrained hyperparameters.

    The previous latent mode warm-starts each inner Newton solve.  The
    curvature is a central finite-difference Hessian of the negative log
    marginal at the simplex mode.  The initial simplex spans an explicit
    `simplex_step` per coordinate: scipy's default puts a 2.5e-4 offset on
    any coordinate that starts at zero, which freezes that direction.
    """
    warm: dict = {"mode": init_latent}
    penalty = 1e10

    def negative(z: np.ndarray) -> float:
        try:
            hyper = Hyperparameters.from_unconstrained(z)
            value = log_marginal_hyper(hyper, spec, init=warm["mode"], mode_out=warm)
        except (ModeError, FactorizationError, SpecError, FloatingPointError):
            return penalty
        if not np.isfinite(value):
            return penalty
        return -value

    z0 = init.to_unconstrained()
    f0 = negative(z0)
    if not f0 < penalty:
        raise InitializationError(
            "log marginal not finite at the initial hyperparameters"
        )

    simplex = np.vstack([z0, z0 + simplex_step * np.eye(len(z0))])
    result = optimize.minimize(
        negative,
        z0,
        method="Nelder-Mead",
        options={
            "maxfev": max_evaluations,
            "xatol": xatol,
            "fatol": fatol,
            "adaptive": True,
            "initial_simplex": simplex,
        },
    )
    z_mode = np.asarray(result.x, dtype=float)
    curvature = _fd_hessian(negative, z_mode, fd_step, penalty)
    return HyperOptResult(
        hyper_mode=Hyperparameters.from_unconstrained(z_mode),
        curvature=curvature,
        log_marginal=float(-result.fun),
        n_evaluations=int(result.nfev),
        converged=bool(result.success),
    )


def _fd_hessian(fn, z: np.ndarray, h: float, penalty: float) -> np.ndarray:
    k = len(z)
    f0 = fn(z)
    H = np.full((k, k), np.nan)
    shifted: dict[tuple, float] = {}

    def at(*moves) -> float:
        key = tuple(sorted(moves))
        if key not in shifted:
            point = z.copy()
            for idx, sign in moves:
                point[idx] += sign * h
            shifted[key] = fn(point)
        return shifted[key]

    for i in range(k):
        fp, fm = at((i, +1)), at((i, -1))
        H[i, i] = (fp - 2.0 * f0 + fm) / h**2
        for j in range(i + 1, k):
            fpp = at((i, +1), (j, +1))
            fpm = at((i, +1), (j, -1))
            fmp = at((i, -1), (j, +1))
            fmm = at((i, -1), (j, -1))
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h**2)
    if np.any(~np.isfinite(H)) or f0 >= penalty:
        raise InitializationError("curvature evaluation hit a failed objective")
    return 0.5 * (H + H.T)


def gaussian_summary(name: str, mean: float, sd: float) -> PosteriorSummary:
    """Summary of a Gaussian marginal; significance = 80% interval excludes 0."""
    mean = float(mean)
    sd = float(sd)
    lo, hi = mean - Z_80 * sd, mean + Z_80 * sd
    return PosteriorSummary(
        name=name,
        mean=mean,
        sd=sd,
        q10=lo,
        q50=mean,
        q90=hi,
        mode=mean,
        significant=bool(lo > 0.0 or hi < 0.0),
    )


def latent_marginals(
    hyper_mode: Hyperparameters,
    spec: ModelSpec,
    state: FittedState | None = None,
) -> dict[str, PosteriorSummary]:
    """Gaussian marginal summaries at the latent mode, keyed by latent name."""
    if state is None:
        state = _fit_latent(hyper_mode, spec)
    sds = state.marginal_sd()
    names = spec.names or tuple(f"latent[{i}]" for i in range(spec.n_latent))
    return {
        name: gaussian_summary(name, mean, sd)
        for name, mean, sd in zip(names, state.mode, sds)
    }


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(31)


def hyper_marginals(result: HyperOptResult) -> dict[str, PosteriorSummary]:
    """Transform the unconstrained Gaussian at the hyper mode back to the
    natural scales; means via Gauss-Hermite quadrature."""
    z_mode = result.hyper_mode.to_unconstrained()
    cov = np.linalg.pinv(result.curvature)
    var = np.clip(np.diag(cov), 0.0, None)
    sd_z = np.sqrt(var)
    names = result.hyper_mode.names()
    out: dict[str, PosteriorSummary] = {}
    for i, name in enumerate(names):
        def natural(z_val: float) -> float:
            z = z_mode.copy()
            z[i] = z_val
            return getattr(Hyperparameters.from_unconstrained(z), name)

        nodes = z_mode[i] + math.sqrt(2.0) * sd_z[i] * _GH_NODES
        vals = np.array([natural(zv) for zv in nodes])
        weights = _GH_WEIGHTS / math.sqrt(math.pi)
        mean = float(weights @ vals)
        second = float(weights @ vals**2)
        sd = math.sqrt(max(second - mean**2, 0.0))
        q10 = natural(z_mode[i] - Z_80 * sd_z[i])
        q50 = natural(z_mode[i])
        q90 = natural(z_mode[i] + Z_80 * sd_z[i])
        lo, hi = min(q10, q90), max(q10, q90)
        out[name] = PosteriorSummary(
            name=name,
            mean=mean,
            sd=sd,
            q10=lo,
            q50=q50,
            q90=hi,
            mode=natural(z_mode[i]),
            significant=bool(lo > 0.0 or hi < 0.0),
        )
    return out


def expected_count(
    summaries: Mapping[str, PosteriorSummary], species: str, region: int
) -> float:
    """Fixed-effects-only composition exp(intercept + species + region + interaction).

    Interactions absent from the fit (dropped empty cells) contribute zero.
    """
    if species not in SPECIES_GROUPS:
        raise LookupError(f"unknown species group {species!r}")
    if region not in VALID_REGIONS:
        raise LookupError(f"unknown region code {region}")
    total = summaries["intercept"].mean
    if species != _BASELINE_GROUP:
        key = f"species[{species}]"
        if key not in summaries:
            raise LookupError(f"{key} missing from summaries")
        total += summaries[key].mean
    if region != _BASELINE_REGION:
        key = f"region[{region}]"
        if key not in summaries:
            raise LookupError(f"{key} missing from summaries")
        total += summaries[key].mean
    if species != _BASELINE_GROUP and region != _BASELINE_REGION:
        inter = f"species[{species}]:region[{region}]"
        if inter in summaries:
            total += summaries[inter].mean
    return float(math.exp(total))


# ------------------------------------------------- predictive distribution


def _mixture_cdf(mus: np.ndarray, p: float, sigma2: float):
    """CDF of the Tweedie mixture over linear-predictor draws.

    Returns (F, zero_mass) with F vectorized in nothing: scalar y -> scalar
    probability, averaging the compound Poisson-gamma CDF over draws.
    """
    mus = np.asarray(mus, dtype=float)
    alpha = (2.0 - p) / (p - 1.0)
    lam = mus ** (2.0 - p) / (sigma2 * (2.0 - p))
    scale = sigma2 * (p - 1.0) * mus ** (p - 1.0)
    lam_max = float(lam.max())
    if not math.isfinite(lam_max):
        raise ValueError(
            "nonfinite Poisson intensity in the predictive mixture; the "
            "linear-predictor draws overflow exp()"
        )
    j_hi = int(math.ceil(lam_max + 12.0 * math.sqrt(lam_max) + 25.0))
    # beyond ~2e4 Poisson terms the weight matrix would not fit in memory
    # and the fitted law is degenerate anyway; fail with a diagnosis
    if j_hi > 20_000:
        raise ValueError(
            f"predictive mixture needs {j_hi} Poisson terms "
            f"(max intensity {lam_max:.3g}); the fitted parameters are too "
            "extreme for band computation"
        )
    j = np.arange(1, j_hi + 1)
    log_w = j[None, :] * np.log(lam[:, None]) - lam[:, None] - sc.gammaln(j + 1.0)[None, :]
    weights = np.exp(log_w)
    zero = np.exp(-lam)
    # columns whose Poisson weight is negligible for every draw cannot move
    # the CDF by more than ~1e-12 total
    keep = weights.max(axis=0) > 1e-15
    weights = weights[:, keep]
    shapes = (j * alpha)[keep]

    def cdf(y: float) -> float:
        if y < 0:
            return 0.0
        g = sc.gammainc(shapes[None, :], y / scale[:, None])
        vals = zero + np.sum(weights * g, axis=1)
        return float(np.mean(np.clip(vals, 0.0, 1.0)))

    return cdf, float(np.mean(zero))


def mixture_quantiles(
    eta_mean: float,
    eta_sd: float,
    p: float,
    sigma2: float,
    levels: Sequence[float],
    n_draws: int = 2000,
    seed: int = 0,
) -> dict[float, float]:
    """Quantiles of the eta-uncertainty-averaged Tweedie, by CDF inversion.

    The mixture CDF is inverted directly; quantiles of individual draws are
    never averaged.
    """
    for level in levels:
        if not 0.0 < level < 1.0:
            raise SpecError(f"quantile level {level} outside (0, 1)")
    rng = np.random.default_rng(seed)
    etas = eta_mean + eta_sd * rng.standard_normal(n_draws)
    cdf, zero_mass = _mixture_cdf(np.exp(etas), p, sigma2)
    out: dict[float, float] = {}
    z_prev = None  # last root: a valid lower bracket for the next level up
    for level in sorted(levels):
        if level <= zero_mass:
            out[level] = 0.0
            continue
        z_hi = float(np.log(max(np.exp(eta_mean + 3.0 * eta_sd), 1.0)))
        for _ in range(200):
            if cdf(math.exp(z_hi)) >= level:
                break
            z_hi += 0.7
        else:
            raise SpecError("quantile bracket expansion failed")
        # walk the lower bracket down in log space; quantiles keep relative
        # precision no matter how small the distribution's scale is
        z_lo = z_prev if z_prev is not None else z_hi
        for _ in range(320):
            if cdf(math.exp(z_lo)) < level:
                break
            z_lo -= 2.5
        else:
            out[level] = 0.0  # positive mass sits below double precision
            continue
        root = optimize.brentq(
            lambda z: cdf(math.exp(z)) - level, z_lo, z_hi, xtol=1e-9
        )
        out[level] = float(math.exp(root))
        z_prev = root
    return out


def predictive_quantiles(
    hyper_mode: Hyperparameters,
    parts: ModelParts,
    cell: tuple[int, str, int],
    levels: Iterable[float],
    n_draws: int = 2000,
    seed: int = 0,
    state: FittedState | None = None,
) -> dict[float, float]:
    """Posterior predictive quantiles for one (region, species group, week) cell.

    Linear-predictor uncertainty from the Gaussian approximation is pushed
    through the log link and the Tweedie observation noise by Monte Carlo
    over eta, then the mixture CDF is inverted at the requested levels.
    """
    region, species, week = cell
    row = parts.row_index(region, species, week)
    if state is None:
        state = _fit_latent(hyper_mode, parts.spec)
    eta_mean, eta_sd = state.eta_moments(row)
    return mixture_quantiles(
        eta_mean,
        eta_sd,
        hyper_mode.p,
        hyper_mode.sigma2,
        list(levels),
        n_draws=n_draws,
        seed=seed,
    )
