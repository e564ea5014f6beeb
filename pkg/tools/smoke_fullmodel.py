"""End-to-end model assembly + inner Newton timing on the toy dataset."""
import time
from importlib import resources

import numpy as np

from carcasswatch import laplace
from carcasswatch.ingest import aggregate_weekly, parse_csv
from carcasswatch.model import build_model, initial_fixed_effects, initial_hyperparameters

with resources.as_file(
    resources.files("carcasswatch.data").joinpath("strandings_toy.csv")
) as path:
    records, rejects = parse_csv(path)
print("records:", len(records), "rejects:", len(rejects))
panel = aggregate_weekly(records)

t0 = time.time()
parts = build_model(panel)
spec = parts.spec
print(f"assembly {time.time()-t0:.2f}s  n_obs={spec.n_obs} n_latent={spec.n_latent} "
      f"mesh={parts.mesh.n_vertices} fixed={parts.design.n_cols}")

h0 = initial_hyperparameters(parts)
print("init hypers:", h0)

x0 = np.zeros(spec.n_latent)
beta0 = initial_fixed_effects(parts.design)
x0[: parts.design.n_cols] = beta0
print("beta0 head:", np.round(beta0[:5], 3))

t0 = time.time()
mode, H, iters = laplace.find_mode(h0, spec, init=x0)
t_mode = time.time() - t0
print(f"newton: {iters} iters in {t_mode:.2f}s; nnz(H)={H.nnz}")

t0 = time.time()
lm = laplace.log_marginal_hyper(h0, spec, init=mode)
print(f"log marginal {lm:.3f} in {time.time()-t0:.2f}s (warm)")

t0 = time.time()
state = laplace._fit_latent(h0, spec, init=mode)
sds = state.marginal_sd()
print(f"inverse diagonal in {time.time()-t0:.2f}s; sd range [{sds.min():.3f}, {sds.max():.3f}]")

marg = laplace.latent_marginals(h0, spec, state=state)
inter = marg["intercept"]
print("intercept:", round(inter.mean, 3), "+/-", round(inter.sd, 3))

t0 = time.time()
qs = laplace.predictive_quantiles(h0, parts, (15, "PI", 10), [0.1, 0.5, 0.9],
                                  n_draws=500, seed=3, state=state)
print(f"predictive quantiles in {time.time()-t0:.2f}s:", {k: round(v, 3) for k, v in qs.items()})
