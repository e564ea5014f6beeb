"""Hierarchical model assembly: likelihoods, hyperparameters, latent blocks.

The latent field is [fixed effects | month-grouped spatial field | weekly
AR(1) | per-region RW(1) over months], observed through a sparse design
B with a log link into the Tweedie likelihood.  Everything hyperparameter
dependent is exposed as builder callables so the Laplace machinery can
re-assemble precisions cheaply inside the outer optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np
from scipy import sparse

from carcasswatch import tweedie
from carcasswatch.design import DesignMatrix, build_design
from carcasswatch.gmrf import (
    SparsePrecision,
    ar1_precision,
    block_diag,
    kron_group,
    rw1_precision,
)
from carcasswatch.ingest import N_MONTHS, N_WEEKS, VALID_REGIONS, WeeklyPanel
from carcasswatch.spatial import Mesh, build_mesh, project_km, projection_matrix

WEEK_RHO_CAP = 0.9999  # keeps the AR(1) precision conditioned near the unit root
_Z_CAP = math.atanh(WEEK_RHO_CAP)
CONSTRAINT_WEIGHT_FACTOR = 1e4  # soft sum-to-zero weight, relative to block precision


class SpecError(ValueError):
    """Inconsistent model specification (dimension or domain mismatch)."""


# -------------------------------------------------------- hyperparameters


@dataclass(frozen=True)
class Hyperparameters:
    """The eight model hyperparameters on their natural scales."""

    p: float = 1.5
    sigma2: float = 1.0
    spatial_range: float = 200.0
    spatial_sd: float = 1.0
    group_rho: float = 0.5
    week_prec: float = 1.0
    week_rho: float = 0.5
    region_prec: float = 1.0

    def __post_init__(self):
        if not 1.0 < self.p < 2.0:
            raise SpecError(f"p must lie in (1, 2), got {self.p}")
        for name in ("sigma2", "spatial_range", "spatial_sd", "week_prec", "region_prec"):
            if not getattr(self, name) > 0:
                raise SpecError(f"{name} must be positive")
        if not abs(self.group_rho) < 1.0:
            raise SpecError(f"|group_rho| must be < 1, got {self.group_rho}")
        if not abs(self.week_rho) <= WEEK_RHO_CAP:
            raise SpecError(f"|week_rho| must be <= {WEEK_RHO_CAP}, got {self.week_rho}")

    def to_unconstrained(self) -> np.ndarray:
        return np.array(
            [
                math.log((self.p - 1.0) / (2.0 - self.p)),
                math.log(self.sigma2),
                math.log(self.spatial_range),
                math.log(self.spatial_sd),
                math.atanh(self.group_rho),
                math.log(self.week_prec),
                math.atanh(self.week_rho),
                math.log(self.region_prec),
            ]
        )

    @classmethod
    def from_unconstrained(cls, z: np.ndarray) -> "Hyperparameters":
        z = np.asarray(z, dtype=float)
        if z.shape != (8,):
            raise SpecError(f"expected 8 unconstrained values, got shape {z.shape}")
        return cls(
            p=1.0 + 1.0 / (1.0 + math.exp(-z[0])),
            sigma2=math.exp(z[1]),
            spatial_range=math.exp(z[2]),
            spatial_sd=math.exp(z[3]),
            group_rho=math.tanh(z[4]),
            week_prec=math.exp(z[5]),
            week_rho=math.tanh(np.clip(z[6], -_Z_CAP, _Z_CAP)),
            region_prec=math.exp(z[7]),
        )

    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self))

    def replace(self, **kw) -> "Hyperparameters":
        return replace(self, **kw)


def default_hyperprior(reference_range: float) -> Callable[[Hyperparameters], float]:
    """Penalized-complexity-style log-prior on the unconstrained scale.

    Exponential(1) on the spatial / week / region-walk standard
    deviations, logit-normal(0, 1.5^2) on the correlation parameters,
    N(0, 2^2) on log sigma2, uniform-via-logit on p, and the
    penalized-complexity range prior calibrated so that
    P(range < reference_range / 10) = 1%.  Jacobians included.

    The exp(-lambda/range) factor matters: without it the marginal
    likelihood on spiky count data can favor a near-zero range with a
    huge marginal sd, where the field interpolates the observations.
    """
    lam_range = -math.log(0.01) * (reference_range / 10.0)

    def logprior(h: Hyperparameters) -> float:
        z = h.to_unconstrained()
        out = 0.0
        # p ~ Uniform(1, 2): density of the logit transform itself
        out += -np.log1p(math.exp(-z[0])) - np.log1p(math.exp(z[0]))
        out += -0.5 * (z[1] / 2.0) ** 2
        # PC range prior on z = log range, capped to stay finite
        out += math.log(lam_range) - z[2] - lam_range * math.exp(min(-z[2], 690.0))
        out += -h.spatial_sd + z[3]  # Exp(1) on sd, Jacobian d sd/dz = sd
        out += -0.5 * (z[4] / 1.5) ** 2
        # Exp(1) on 1/sqrt(prec): log-density - s with Jacobian s/2
        for z_prec in (z[5], z[7]):
            s = math.exp(-0.5 * z_prec)
            out += -s + math.log(s / 2.0)
        out += -0.5 * (z[6] / 1.5) ** 2
        return float(out)

    return logprior


# ------------------------------------------------------------ likelihoods


class TweedieLikelihood:
    """Tweedie log-likelihood of a fixed data vector as a function of eta.

    The series normalization depends only on (y, p, sigma2), so it is
    computed once per instance; per-eta evaluations are elementwise
    arithmetic.
    """

    def __init__(self, y: np.ndarray, p: float, sigma2: float):
        self.y = np.asarray(y, dtype=float)
        if np.any(self.y < 0) or np.any(~np.isfinite(self.y)):
            raise SpecError("Tweedie responses must be finite and non-negative")
        self.p = float(p)
        self.sigma2 = float(sigma2)
        self._positive = self.y > 0
        pos = self.y[self._positive]
        self._const = np.zeros_like(self.y)
        if pos.size:
            self._const[self._positive] = tweedie.log_series_sum(
                pos, self.p, self.sigma2
            ) - np.log(pos)

    def log_lik(self, eta: np.ndarray) -> float:
        mu = np.exp(eta)
        p, s2 = self.p, self.sigma2
        tilt = (self.y * mu ** (1.0 - p) / (1.0 - p) - mu ** (2.0 - p) / (2.0 - p)) / s2
        return float(np.sum(self._const + tilt))

    def derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return tweedie.eta_derivatives(self.y, np.exp(eta), self.p, self.sigma2)


class GaussianLikelihood:
    """Identity-link Gaussian likelihood; makes the Laplace pipeline exact."""

    def __init__(self, y: np.ndarray, variance: float):
        self.y = np.asarray(y, dtype=float)
        if variance <= 0:
            raise SpecError("variance must be positive")
        self.variance = float(variance)

    def log_lik(self, eta: np.ndarray) -> float:
        r = self.y - eta
        n = len(self.y)
        return float(
            -0.5 * np.dot(r, r) / self.variance
            - 0.5 * n * math.log(2.0 * math.pi * self.variance)
        )

    def derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d1 = (self.y - eta) / self.variance
        w = np.full(len(self.y), 1.0 / self.variance)
        return d1, w


# -------------------------------------------------------------- ModelSpec


@dataclass(frozen=True)
class ModelSpec:
    """Everything the Laplace machinery needs, with hyper-dependent builders."""

    y: np.ndarray = field(compare=False)
    design: sparse.csr_matrix = field(compare=False)  # maps latent -> eta
    prior_builder: Callable[[Hyperparameters], SparsePrecision] = field(compare=False)
    likelihood_builder: Callable[[Hyperparameters, np.ndarray], object] = field(compare=False)
    hyperprior: Callable[[Hyperparameters], float] = field(compare=False)
    names: tuple[str, ...] = ()
    constraint_weight: Callable[[Hyperparameters], float] = field(
        default=lambda h: CONSTRAINT_WEIGHT_FACTOR, compare=False
    )

    def __post_init__(self):
        if self.design.shape[0] != len(self.y):
            raise SpecError(
                f"design rows {self.design.shape[0]} != observations {len(self.y)}"
            )
        if self.names and len(self.names) != self.design.shape[1]:
            raise SpecError("latent names do not match design columns")

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def n_latent(self) -> int:
        return self.design.shape[1]

    def prior_matrix(self, hyper: Hyperparameters) -> sparse.csc_matrix:
        """Prior precision with soft constraints folded in (kept SPD)."""
        prior = self.prior_builder(hyper)
        return prior.constrained_matrix(self.constraint_weight(hyper))


# ----------------------------------------------------- full model assembly


@dataclass(frozen=True)
class ModelParts:
    """A ModelSpec plus the artifacts needed to interpret its latent vector."""

    spec: ModelSpec
    design: DesignMatrix
    mesh: Mesh
    blocks: dict = field(compare=False)  # name -> slice into the latent vector

    def row_index(self, region_code: int, species_group: str, week_index: int) -> int:
        d = self.design
        groups = np.asarray(d.species_group)
        hits = np.where(
            (d.region_code == region_code)
            & (groups == species_group)
            & (d.week_index == week_index)
        )[0]
        if len(hits) != 1:
            raise SpecError(
                f"cell (region={region_code}, group={species_group}, "
                f"week={week_index}) does not identify one row"
            )
        return int(hits[0])


def _row_locations(design: DesignMatrix) -> np.ndarray:
    """Per-row (lon, lat); cells without reports fall back to the region
    mean location, then to the overall mean."""
    lon = design.lon.copy()
    lat = design.lat.copy()
    known = ~np.isnan(lat)
    if not np.any(known):
        raise SpecError("no observed coordinates to anchor the spatial field")
    overall = (lon[known].mean(), lat[known].mean())
    for r in sorted(set(design.region_code.tolist())):
        sel = design.region_code == r
        sel_known = sel & known
        fill = (
            (lon[sel_known].mean(), lat[sel_known].mean())
            if np.any(sel_known)
            else overall
        )
        lon[sel & ~known] = fill[0]
        lat[sel & ~known] = fill[1]
    return np.column_stack([lon, lat])


def build_model(
    panel: WeeklyPanel,
    fixed_sd: float = 10.0,
    max_edge_km: float = 75.0,
    extension_km: float = 150.0,
    mesh: Mesh | None = None,
) -> ModelParts:
    """Assemble the full surveillance model for a weekly panel."""
    design = build_design(panel)
    locations = _row_locations(design)
    if mesh is None:
        known = ~np.isnan(design.lat)
        sites = np.column_stack([design.lon[known], design.lat[known]])
        mesh = build_mesh(sites, max_edge_km=max_edge_km, extension_km=extension_km)

    n_obs = design.n_rows
    n_fix = design.n_cols
    m = mesh.n_vertices
    regions = sorted(VALID_REGIONS)
    region_slot = {r: i for i, r in enumerate(regions)}

    A_site = projection_matrix(mesh, locations).tocoo()
    month = design.month_index
    # month-grouped spatial field: row i loads block (month_i - 1)
    sp_cols = A_site.col + (month[A_site.row] - 1) * m
    A_spatial = sparse.coo_matrix(
        (A_site.data, (A_site.row, sp_cols)), shape=(n_obs, N_MONTHS * m)
    )

    rows = np.arange(n_obs)
    A_week = sparse.coo_matrix(
        (np.ones(n_obs), (rows, design.week_index - 1)), shape=(n_obs, N_WEEKS)
    )
    rm_cols = np.array(
        [region_slot[r] * N_MONTHS + (mth - 1) for r, mth in zip(design.region_code, month)]
    )
    A_region_month = sparse.coo_matrix(
        (np.ones(n_obs), (rows, rm_cols)), shape=(n_obs, len(regions) * N_MONTHS)
    )

    B = sparse.hstack(
        [design.matrix, A_spatial, A_week, A_region_month], format="csr"
    )

    blocks = {
        "fixed": slice(0, n_fix),
        "spatial": slice(n_fix, n_fix + N_MONTHS * m),
        "week": slice(n_fix + N_MONTHS * m, n_fix + N_MONTHS * m + N_WEEKS),
        "region_month": slice(n_fix + N_MONTHS * m + N_WEEKS, B.shape[1]),
    }
    names = (
        list(design.column_names)
        + [f"spatial[month={g + 1},vertex={v}]" for g in range(N_MONTHS) for v in range(m)]
        + [f"week[{t + 1}]" for t in range(N_WEEKS)]
        + [f"region_month[region={r},month={s + 1}]" for r in regions for s in range(N_MONTHS)]
    )

    from carcasswatch.spatial import spde_builder  # local to avoid cycle at import

    build_spde = spde_builder(mesh)

    def prior_builder(h: Hyperparameters) -> SparsePrecision:
        fixed = SparsePrecision(
            matrix=sparse.identity(n_fix, format="csc") / fixed_sd**2
        )
        spde = build_spde(h.spatial_range, h.spatial_sd)
        spatial = kron_group(spde, N_MONTHS, h.group_rho)
        week = ar1_precision(N_WEEKS, h.week_rho, h.week_prec)
        region_walks = block_diag(
            [rw1_precision(N_MONTHS, h.region_prec) for _ in regions]
        )
        return block_diag([fixed, spatial, week, region_walks])

    def likelihood_builder(h: Hyperparameters, y: np.ndarray) -> TweedieLikelihood:
        return TweedieLikelihood(y, h.p, h.sigma2)

    km = project_km(locations, mesh.origin)
    diameter = float(np.linalg.norm(km.max(axis=0) - km.min(axis=0)))
    hyperprior = default_hyperprior(reference_range=max(diameter / 5.0, 1.0))

    def constraint_weight(h: Hyperparameters) -> float:
        return CONSTRAINT_WEIGHT_FACTOR * h.region_prec

    spec = ModelSpec(
        y=design.y,
        design=B,
        prior_builder=prior_builder,
        likelihood_builder=likelihood_builder,
        hyperprior=hyperprior,
        names=tuple(names),
        constraint_weight=constraint_weight,
    )
    return ModelParts(spec=spec, design=design, mesh=mesh, blocks=blocks)


def initial_hyperparameters(parts: ModelParts) -> Hyperparameters:
    """Documented starting point: domain-scaled range, mid-range p."""
    km = project_km(
        np.column_stack([parts.design.lon, parts.design.lat])[
            ~np.isnan(parts.design.lat)
        ],
        parts.mesh.origin,
    )
    diameter = float(np.linalg.norm(km.max(axis=0) - km.min(axis=0)))
    return Hyperparameters(
        p=1.5,
        sigma2=1.0,
        spatial_range=max(diameter / 5.0, 1.0),
        spatial_sd=1.0,
        group_rho=0.5,
        week_prec=1.0,
        week_rho=0.5,
        region_prec=1.0,
    )


def initial_fixed_effects(design: DesignMatrix) -> np.ndarray:
    """Quasi-likelihood GLM pass (log link, variance ~ mu^1.5) for beta."""
    X = design.matrix.toarray()
    y = design.y
    beta = np.zeros(X.shape[1])
    beta[0] = math.log(max(y.mean(), 0.1))
    for _ in range(25):
        eta = np.clip(X @ beta, -30.0, 30.0)
        mu = np.exp(eta)
        w = mu**0.5  # mu^2 / V(mu) with V = mu^1.5
        z = eta + (y - mu) / mu
        WX = X * w[:, None]
        lhs = WX.T @ X + 1e-8 * np.eye(X.shape[1])
        rhs = WX.T @ z
        new = np.linalg.solve(lhs, rhs)
        if np.max(np.abs(new - beta)) < 1e-8:
            beta = new
            break
        beta = new
    return beta
