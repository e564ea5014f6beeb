"""Informal oracle checks for model.py + laplace.py before formal tests."""
import math

import numpy as np
from scipy import sparse, stats

from carcasswatch import laplace, tweedie
from carcasswatch.gmrf import SparsePrecision, ar1_precision
from carcasswatch.model import (
    GaussianLikelihood,
    Hyperparameters,
    ModelSpec,
    TweedieLikelihood,
)

rng = np.random.default_rng(42)

# 1. hyperparameter transform round trip
h = Hyperparameters(
    p=1.92, sigma2=0.437, spatial_range=173.2, spatial_sd=1.568,
    group_rho=0.907, week_prec=0.116, week_rho=0.9999, region_prec=39.302,
)
h2 = Hyperparameters.from_unconstrained(h.to_unconstrained())
err = max(abs(getattr(h, n) - getattr(h2, n)) / max(abs(getattr(h, n)), 1) for n in h.names())
print("round trip rel err:", err)
assert err < 1e-12

# cap behavior
z = h.to_unconstrained()
z[6] = 50.0
h3 = Hyperparameters.from_unconstrained(z)
print("capped week_rho:", h3.week_rho)
assert abs(h3.week_rho) <= 0.9999 + 1e-15

# 2. Gaussian spec: Laplace must be exact
n_obs, n_lat = 40, 12
B = sparse.csr_matrix(rng.normal(size=(n_obs, n_lat)) * (rng.random((n_obs, n_lat)) < 0.4))
Qp = ar1_precision(n_lat, 0.6, 2.0)
v = 0.7
y = rng.normal(size=n_obs)

spec = ModelSpec(
    y=y,
    design=B,
    prior_builder=lambda hh: Qp,
    likelihood_builder=lambda hh, yy: GaussianLikelihood(yy, v),
    hyperprior=lambda hh: 0.0,
    names=tuple(f"b{i}" for i in range(n_lat)),
)

mode, H, iters = laplace.find_mode(h, spec)
Qd = Qp.matrix.toarray()
Hd = Qd + (B.T.toarray() @ B.toarray()) / v
mode_exact = np.linalg.solve(Hd, B.T.toarray() @ y / v)
print("gaussian newton iters:", iters, "mode err:", np.abs(mode - mode_exact).max())
assert iters <= 2
assert np.abs(mode - mode_exact).max() < 1e-10

# idempotence: init at mode
_, _, iters2 = laplace.find_mode(h, spec, init=mode)
print("iters from mode:", iters2)
assert iters2 <= 1

# analytic marginal
Sigma = v * np.eye(n_obs) + B.toarray() @ np.linalg.solve(Qd, B.toarray().T)
lm_exact = stats.multivariate_normal(mean=np.zeros(n_obs), cov=Sigma).logpdf(y)
lm = laplace.log_marginal_hyper(h, spec)
print("marginal err:", abs(lm - lm_exact))
assert abs(lm - lm_exact) < 1e-8

# conjugate marginals
post_cov = np.linalg.inv(Hd)
marg = laplace.latent_marginals(h, spec)
means = np.array([marg[f"b{i}"].mean for i in range(n_lat)])
sds = np.array([marg[f"b{i}"].sd for i in range(n_lat)])
print("marginal mean err:", np.abs(means - mode_exact).max(),
      "sd err:", np.abs(sds - np.sqrt(np.diag(post_cov))).max())
assert np.abs(means - mode_exact).max() < 1e-8
assert np.abs(sds - np.sqrt(np.diag(post_cov))).max() < 1e-8

# 3. 1-D conjugate normal-normal closed form
y1 = np.array([1.3])
spec1 = ModelSpec(
    y=y1,
    design=sparse.csr_matrix(np.array([[1.0]])),
    prior_builder=lambda hh: SparsePrecision(matrix=sparse.csc_matrix(np.array([[1.0 / 4.0]]))),
    likelihood_builder=lambda hh, yy: GaussianLikelihood(yy, 0.25),
    hyperprior=lambda hh: 0.0,
)
lm1 = laplace.log_marginal_hyper(h, spec1)
lm1_exact = stats.norm(loc=0.0, scale=math.sqrt(4.0 + 0.25)).logpdf(1.3)
print("1-D conjugate err:", abs(lm1 - lm1_exact))
assert abs(lm1 - lm1_exact) < 1e-10

# 4. FD gradient of joint log density (Tweedie likelihood)
n_obs, n_lat = 25, 8
Bt = sparse.csr_matrix(rng.normal(size=(n_obs, n_lat)) * 0.3)
yt = tweedie.sample(tweedie.TweedieParams(mu=3.0, p=1.6, sigma2=0.8), n_obs, rng)
spec_t = ModelSpec(
    y=yt,
    design=Bt,
    prior_builder=lambda hh: ar1_precision(n_lat, 0.4, 1.5),
    likelihood_builder=lambda hh, yy: TweedieLikelihood(yy, hh.p, hh.sigma2),
    hyperprior=lambda hh: 0.0,
)
ht = Hyperparameters(p=1.6, sigma2=0.8)
x0 = rng.normal(size=n_lat) * 0.4

Qt = spec_t.prior_matrix(ht)
lik = spec_t.likelihood_builder(ht, yt)
d1, w = lik.derivatives(Bt @ x0)
grad = Bt.T @ d1 - Qt @ x0
eps = 1e-6
fd = np.zeros(n_lat)
for i in range(n_lat):
    e = np.zeros(n_lat); e[i] = eps
    fd[i] = (laplace.joint_log_density(x0 + e, ht, spec_t)
             - laplace.joint_log_density(x0 - e, ht, spec_t)) / (2 * eps)
rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)
print("joint gradient rel err:", rel.max())
assert rel.max() < 1e-5

# Tweedie mode vs dense optimizer
from scipy.optimize import minimize
mode_t, Ht, it_t = laplace.find_mode(ht, spec_t)
neg = lambda x: -(lik.log_lik(Bt @ x) - 0.5 * x @ (Qt @ x))
res = minimize(neg, np.zeros(n_lat), method="BFGS", options={"gtol": 1e-10})
print("tweedie mode iters:", it_t, "vs BFGS err:", np.abs(mode_t - res.x).max())
assert np.abs(mode_t - res.x).max() < 1e-6

# 5. degenerate-eta mixture quantiles vs direct tweedie inversion
params = tweedie.TweedieParams(mu=4.0, p=1.7, sigma2=0.9)
qs = laplace.mixture_quantiles(math.log(4.0), 0.0, 1.7, 0.9, [0.1, 0.5, 0.9], n_draws=64, seed=1)
for lev in (0.1, 0.5, 0.9):
    direct = tweedie.quantile(lev, params)
    print(f"  level {lev}: mixture {qs[lev]:.6f} direct {direct:.6f}")
    assert abs(qs[lev] - direct) < 1e-4

# zero-atom level
p0 = math.exp(-params.poisson_rate)
qs0 = laplace.mixture_quantiles(math.log(4.0), 0.0, 1.7, 0.9, [p0 * 0.5], n_draws=16, seed=1)
assert qs0[p0 * 0.5] == 0.0
print("zero-atom quantile ok")

# 6. expected_count arithmetic on synthetic summaries
def summ(name, mean):
    return laplace.PosteriorSummary(name=name, mean=mean, sd=1.0, q10=mean - 1,
                                    q50=mean, q90=mean + 1, mode=mean, significant=False)
table = {
    "intercept": summ("intercept", -0.246),
    "species[PI]": summ("species[PI]", -0.425),
    "region[9]": summ("region[9]", 3.498),
    "species[PI]:region[9]": summ("species[PI]:region[9]", -1.925),
    "region[15]": summ("region[15]", 2.525),
    "species[PI]:region[15]": summ("species[PI]:region[15]", 0.010),
}
e9 = laplace.expected_count(table, "PI", 9)
e15 = laplace.expected_count(table, "PI", 15)
print("expected_count R9:", e9, "R15:", e15)
assert abs(e9 - math.exp(-0.246 - 0.425 + 3.498 - 1.925)) < 1e-12
assert abs(e15 - math.exp(-0.246 - 0.425 + 2.525 + 0.010)) < 1e-12
assert abs(laplace.expected_count(table, "BI", 1) - math.exp(-0.246)) < 1e-12

print("ALL LAPLACE SMOKE CHECKS PASSED")
