"""Statistical-process-control layer over a fitted artifact.

Each chart compares observed weekly counts for one region x species-group
cell against the model's predictive band.  Points above the upper band
are out-of-control alerts; weeks in which the region had no field visits
are gaps, not zeros.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

from carcasswatch.artifact import FittedArtifact
from carcasswatch.ingest import N_WEEKS, SPECIES_GROUPS, VALID_REGIONS
from carcasswatch.laplace import Z_80, mixture_quantiles

IN_CONTROL = "in-control"
ABOVE_BAND = "above-band"
BELOW_BAND = "below-band"

_NORMAL_QUANTILE_CACHE = {0.10: -Z_80, 0.50: 0.0, 0.90: Z_80}


def _normal_quantile(level: float) -> float:
    if level in _NORMAL_QUANTILE_CACHE:
        return _NORMAL_QUANTILE_CACHE[level]
    from scipy import stats

    return float(stats.norm.ppf(level))


class ChartError(ValueError):
    """Invalid chart request (bad level or band kind)."""


@dataclass(frozen=True)
class ControlChart:
    region: int
    species_group: str
    level: float
    band: str  # "predictive" or "latent"
    weeks: tuple
    expected: tuple  # posterior predictive median per week
    lower: tuple
    upper: tuple
    observed: tuple  # float, or None on weeks without field visits
    flags: tuple

    def __post_init__(self):
        n = len(self.weeks)
        for name in ("expected", "lower", "upper", "observed", "flags"):
            if len(getattr(self, name)) != n:
                raise ChartError(f"{name} length != number of weeks")
        for lo, mid, hi in zip(self.lower, self.expected, self.upper):
            if not (lo <= mid <= hi):
                raise ChartError("band must satisfy lower <= expected <= upper")
        for obs, lo, hi, flag in zip(self.observed, self.lower, self.upper, self.flags):
            if flag != _classify(obs, lo, hi):
                raise ChartError("flag inconsistent with band and observation")

    def to_json(self) -> dict:
        return {
            "region": self.region,
            "species": self.species_group,
            "level": self.level,
            "band": self.band,
            "weeks": list(self.weeks),
            "expected": list(self.expected),
            "lower": list(self.lower),
            "upper": list(self.upper),
            "observed": list(self.observed),
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class AlertReport:
    rows: tuple  # (region, species_group, week, observed, upper, exceedance)

    def to_json(self) -> list:
        return [
            {
                "region": r,
                "species": g,
                "week": w,
                "observed": obs,
                "upper": up,
                "exceedance": ex,
            }
            for r, g, w, obs, up, ex in self.rows
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["region", "species", "week", "observed", "upper", "exceedance"])
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()


def _classify(observed, lower: float, upper: float) -> str:
    if observed is None:
        return IN_CONTROL
    if observed > upper:
        return ABOVE_BAND
    if observed < lower:
        return BELOW_BAND
    return IN_CONTROL


def _sampled_weeks(artifact: FittedArtifact, region: int) -> set:
    """Weeks in which the region had any field visit (any species group)."""
    return {
        e["week"] for e in artifact.panel_data if e["region"] == region
    }


def build_chart(
    artifact: FittedArtifact,
    region: int,
    species_group: str,
    level: float = 0.80,
    band: str = "predictive",
    n_draws: int = 500,
    seed: int | None = None,
) -> ControlChart:
    """Chart one cell series against the fitted model's band at `level`."""
    if not 0.0 < level < 1.0:
        raise ChartError(f"level {level} outside (0, 1)")
    if band not in ("predictive", "latent"):
        raise ChartError(f"unknown band kind {band!r}")
    if region not in VALID_REGIONS:
        raise LookupError(f"unknown region code {region}")
    if species_group not in SPECIES_GROUPS:
        raise LookupError(f"unknown species group {species_group!r}")
    if seed is None:
        seed = int(artifact.seeds.get("chart", 0))

    p = artifact.hyper_mode["p"]
    sigma2 = artifact.hyper_mode["sigma2"]
    lo_level, hi_level = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    sampled = _sampled_weeks(artifact, region)

    weeks, expected, lower, upper, observed, flags = [], [], [], [], [], []
    for week in range(1, N_WEEKS + 1):
        row = artifact.row_index(region, species_group, week)
        eta_m = float(artifact.eta_mean[row])
        eta_s = float(artifact.eta_sd[row])
        if band == "predictive":
            qs = mixture_quantiles(
                eta_m, eta_s, p, sigma2,
                [lo_level, 0.5, hi_level],
                n_draws=n_draws,
                seed=seed + row,
            )
            lo, mid, hi = qs[lo_level], qs[0.5], qs[hi_level]
        else:
            # latent band: quantiles of exp(eta) only, no observation noise
            lo = math.exp(eta_m + _normal_quantile(lo_level) * eta_s)
            mid = math.exp(eta_m)
            hi = math.exp(eta_m + _normal_quantile(hi_level) * eta_s)
        obs = float(artifact.row_observed[row]) if week in sampled else None
        weeks.append(week)
        expected.append(mid)
        lower.append(lo)
        upper.append(hi)
        observed.append(obs)
        flags.append(_classify(obs, lo, hi))
    return ControlChart(
        region=region,
        species_group=species_group,
        level=level,
        band=band,
        weeks=tuple(weeks),
        expected=tuple(expected),
        lower=tuple(lower),
        upper=tuple(upper),
        observed=tuple(observed),
        flags=tuple(flags),
    )


def alert_report(charts: Sequence[ControlChart]) -> AlertReport:
    """Flatten, deduplicate, and rank the above-band events of the charts."""
    seen = {}
    for chart in charts:
        for week, obs, up, flag in zip(
            chart.weeks, chart.observed, chart.upper, chart.flags
        ):
            if flag != ABOVE_BAND:
                continue
            key = (chart.region, chart.species_group, week)
            exceedance = obs / up if up > 0 else math.inf
            seen[key] = (chart.region, chart.species_group, week, obs, up, exceedance)
    rows = sorted(seen.values(), key=lambda r: (-r[5], r[0], r[1], r[2]))
    return AlertReport(rows=tuple(rows))


def band_monotonicity_check(narrow: ControlChart, wide: ControlChart) -> bool:
    """True iff the wide chart's band contains the narrow chart's, weekly."""
    if narrow.weeks != wide.weeks:
        raise ChartError("charts cover different weeks")
    return all(
        w_lo <= n_lo and n_hi <= w_hi
        for n_lo, n_hi, w_lo, w_hi in zip(
            narrow.lower, narrow.upper, wide.lower, wide.upper
        )
    )
