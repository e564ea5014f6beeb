"""Forward simulation from the hierarchical model.

Used by the calibration checks: draw a latent field from its prior, push
it through the design and the Tweedie observation model, and hand the
synthetic panel back for refitting.
"""

from __future__ import annotations

import numpy as np

from carcasswatch.linalg import CholeskyFactor
from carcasswatch.model import Hyperparameters, ModelParts, ModelSpec


def simulate_latent(
    hyper: Hyperparameters,
    spec: ModelSpec,
    rng: np.random.Generator,
    fixed_effects: np.ndarray | None = None,
    fixed_slice: slice | None = None,
) -> np.ndarray:
    """One draw of the latent vector from its (soft-constrained) prior.

    `fixed_effects` overrides the given slice, so simulations can pin the
    regression coefficients while the structured blocks stay random.
    """
    Q = spec.prior_matrix(hyper)
    latent = CholeskyFactor(Q).sample(rng, 1)[0]
    if fixed_effects is not None:
        if fixed_slice is None:
            fixed_slice = slice(0, len(fixed_effects))
        latent[fixed_slice] = fixed_effects
    return latent


def tweedie_array(
    mu: np.ndarray, p: float, sigma2: float, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized compound Poisson-gamma draws, one per mean."""
    mu = np.asarray(mu, dtype=float)
    lam = mu ** (2.0 - p) / (sigma2 * (2.0 - p))
    alpha = (2.0 - p) / (p - 1.0)
    scale = sigma2 * (p - 1.0) * mu ** (p - 1.0)
    counts = rng.poisson(lam)
    out = np.zeros(mu.shape)
    positive = counts > 0
    # sum of N iid Gamma(alpha, scale) is Gamma(N * alpha, scale)
    out[positive] = rng.gamma(counts[positive] * alpha, scale[positive])
    return out


def simulate_observations(
    hyper: Hyperparameters,
    spec: ModelSpec,
    latent: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    eta = spec.design @ latent
    return tweedie_array(np.exp(eta), hyper.p, hyper.sigma2, rng)


def simulate_from_model(
    parts: ModelParts,
    hyper: Hyperparameters,
    rng: np.random.Generator,
    fixed_effects: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Latent draw + matching synthetic response for a built model."""
    latent = simulate_latent(
        hyper,
        parts.spec,
        rng,
        fixed_effects=fixed_effects,
        fixed_slice=parts.blocks["fixed"],
    )
    y = simulate_observations(hyper, parts.spec, latent, rng)
    return latent, y


def with_response(spec: ModelSpec, y: np.ndarray) -> ModelSpec:
    """Same spec, new response vector (for refitting synthetic data)."""
    from dataclasses import replace

    y = np.asarray(y, dtype=float)
    if y.shape != spec.y.shape:
        raise ValueError(f"response shape {y.shape} != {spec.y.shape}")
    return replace(spec, y=y)
