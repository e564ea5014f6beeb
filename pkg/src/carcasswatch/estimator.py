"""High-level fitting facade with a scikit-learn-style interface."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from carcasswatch import laplace
from carcasswatch.artifact import (
    FittedArtifact,
    compute_spec_hash,
    panel_to_payload,
)
from carcasswatch.ingest import (
    SurveillanceRecord,
    WeeklyPanel,
    aggregate_weekly,
)
from carcasswatch.model import (
    Hyperparameters,
    build_model,
    initial_fixed_effects,
    initial_hyperparameters,
)
from carcasswatch.summaries import species_ranking


class StrandingModel(BaseEstimator):
    """Bayesian spatio-temporal surveillance model of weekly stranding counts.

    Parameters are plain constructor arguments; `fit` accepts either parsed
    surveillance records or a prepared weekly panel and exposes the posterior
    through fitted attributes (trailing underscore) and `to_artifact`.
    """

    def __init__(
        self,
        level: float = 0.80,
        max_edge_km: float = 75.0,
        extension_km: float = 150.0,
        fixed_sd: float = 10.0,
        max_evaluations: int = 400,
        predictive_draws: int = 500,
        seed: int = 20230102,
        init_hyper: Hyperparameters | None = None,
    ):
        self.level = level
        self.max_edge_km = max_edge_km
        self.extension_km = extension_km
        self.fixed_sd = fixed_sd
        self.max_evaluations = max_evaluations
        self.predictive_draws = predictive_draws
        self.seed = seed
        self.init_hyper = init_hyper

    # fitting
    def fit(self, data, anchor_week: tuple | None = None) -> "StrandingModel":
        """Fit to a list of SurveillanceRecord or a WeeklyPanel."""
        if isinstance(data, WeeklyPanel):
            panel = data
            records: list[SurveillanceRecord] = []
        else:
            records = list(data)
            panel = aggregate_weekly(records, anchor_week=anchor_week)
        if not panel.entries:
            raise ValueError("cannot fit an empty panel")

        self.panel_ = panel
        self.species_table_ = species_ranking(records) if records else []
        self.parts_ = build_model(
            panel,
            fixed_sd=self.fixed_sd,
            max_edge_km=self.max_edge_km,
            extension_km=self.extension_km,
        )
        spec = self.parts_.spec

        hyper0 = self.init_hyper or initial_hyperparameters(self.parts_)
        x0 = np.zeros(spec.n_latent)
        x0[self.parts_.blocks["fixed"]] = initial_fixed_effects(self.parts_.design)
        # seed the warm start so the first outer evaluation is cheap
        try:
            state0 = laplace._fit_latent(hyper0, spec, init=x0)
            warm = state0.mode
        except laplace.ModeError:
            warm = None

        self.result_ = laplace.optimize_hyper(
            spec, hyper0, max_evaluations=self.max_evaluations, init_latent=warm
        )
        self.hyper_mode_ = self.result_.hyper_mode
        self.state_ = laplace._fit_latent(self.hyper_mode_, spec, init=warm)
        self.latent_summaries_ = laplace.latent_marginals(
            self.hyper_mode_, spec, state=self.state_
        )
        self.hyper_summaries_ = laplace.hyper_marginals(self.result_)
        self.eta_mean_, self.eta_sd_ = self._eta_moments()
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError("this StrandingModel instance is not fitted yet")

    def _eta_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and sd of eta for every design row, batched."""
        B = self.parts_.spec.design.tocsr()
        mode = self.state_.mode
        factor = self.state_.factor
        n_obs = B.shape[0]
        means = np.asarray(B @ mode).ravel()
        variances = np.empty(n_obs)
        chunk = 512
        Bt = B.T.tocsc()
        for start in range(0, n_obs, chunk):
            stop = min(start + chunk, n_obs)
            rhs = np.asarray(Bt[:, start:stop].todense())
            sol = factor.solve(rhs)
            variances[start:stop] = np.sum(rhs * sol, axis=0)
        return means, np.sqrt(np.maximum(variances, 0.0))

    # prediction surfaces
    def predict(self) -> np.ndarray:
        """Posterior predictive mean count per design row: E exp(eta)."""
        self._check_fitted()
        return np.exp(self.eta_mean_ + 0.5 * self.eta_sd_**2)

    def predict_quantiles(
        self, cell: tuple, levels, n_draws: int | None = None, seed: int | None = None
    ) -> dict:
        self._check_fitted()
        return laplace.predictive_quantiles(
            self.hyper_mode_,
            self.parts_,
            cell,
            levels,
            n_draws=n_draws or self.predictive_draws,
            seed=self.seed if seed is None else seed,
            state=self.state_,
        )

    def expected_count(self, species: str, region: int) -> float:
        self._check_fitted()
        return laplace.expected_count(self.latent_summaries_, species, region)

    # artifact export
    def to_artifact(self) -> FittedArtifact:
        self._check_fitted()
        parts = self.parts_
        design = parts.design
        panel = self.panel_

        sampled_pairs = {(e.region_code, e.week_index) for e in panel.entries}
        row_sampled = np.array(
            [
                (r, w) in sampled_pairs
                for r, w in zip(design.region_code, design.week_index)
            ]
        )
        sds = self.state_.marginal_sd()
        blocks = {k: (v.start, v.stop) for k, v in parts.blocks.items()}
        row_arrays = {
            "region": design.region_code,
            "week": design.week_index,
            "month": design.month_index,
            "y": design.y,
            "group": tuple(design.species_group),
        }
        mesh_data = parts.mesh.to_json()
        hyper_mode = {
            name: getattr(self.hyper_mode_, name) for name in self.hyper_mode_.names()
        }
        hyper_summaries = {
            name: _summary_dict(s) for name, s in self.hyper_summaries_.items()
        }
        return FittedArtifact(
            spec_hash=compute_spec_hash(
                parts.spec.names, panel.anchor_week, row_arrays, mesh_data
            ),
            anchor_week=tuple(panel.anchor_week),
            hyper_mode=hyper_mode,
            hyper_summaries=hyper_summaries,
            latent_names=parts.spec.names,
            latent_mean=self.state_.mode.copy(),
            latent_sd=np.asarray(sds, dtype=float).copy(),
            blocks=blocks,
            row_region=design.region_code.astype(np.int64),
            row_group=tuple(design.species_group),
            row_week=design.week_index.astype(np.int64),
            row_month=design.month_index.astype(np.int64),
            row_observed=design.y.astype(float),
            row_sampled=row_sampled,
            eta_mean=self.eta_mean_.copy(),
            eta_sd=self.eta_sd_.copy(),
            mesh_data=mesh_data,
            panel_data=panel_to_payload(panel),
            species_table=[dict(row) for row in self.species_table_],
            seeds={"chart": self.seed, "predictive": self.seed},
            spc_level=self.level,
        )


def _summary_dict(s: laplace.PosteriorSummary) -> dict:
    return {
        "mean": s.mean,
        "sd": s.sd,
        "q10": s.q10,
        "q50": s.q50,
        "q90": s.q90,
        "mode": s.mode,
        "significant": s.significant,
    }


