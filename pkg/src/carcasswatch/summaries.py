"""Descriptive tables over the weekly panel.

Means are per field visit: the denominator is the number of reports
merged into a region's cells, matching the Sum/Mean/Max/n ranking shown
to analysts.  Quantiles use the usual linear interpolation convention.
"""

from __future__ import annotations

import numpy as np

from carcasswatch.ingest import SurveillanceRecord, WeeklyPanel

MONTHS_PER_SEMESTER = 6


def _expand_visit_counts(entries) -> np.ndarray:
    values = []
    for e in entries:
        for value, n in e.visit_counts.items():
            values.extend([value] * n)
    return np.asarray(values, dtype=float)


def region_summary(panel: WeeklyPanel) -> list[dict]:
    """Per-region totals and per-visit means, sorted descending by total."""
    by_region: dict[int, list] = {}
    for e in panel.entries:
        by_region.setdefault(e.region_code, []).append(e)
    rows = []
    for region, entries in by_region.items():
        total = sum(e.count for e in entries)
        visits = sum(e.n_visits for e in entries)
        counts = _expand_visit_counts(entries)
        rows.append(
            {
                "region": region,
                "total": total,
                "weekly_mean": round(total / visits, 2),
                "max": int(counts.max()),
                "n_visits": visits,
            }
        )
    rows.sort(key=lambda r: (-r["total"], r["region"]))
    return rows


def group_summary(panel: WeeklyPanel) -> list[dict]:
    """Per species group: five-number summary plus mean and total.

    Statistics are over the per-visit animal tallies of the group.
    """
    by_group: dict[str, list] = {}
    for e in panel.entries:
        by_group.setdefault(e.species_group, []).append(e)
    rows = []
    for group, entries in by_group.items():
        counts = _expand_visit_counts(entries)
        q1, med, q3 = np.percentile(counts, [25, 50, 75])
        rows.append(
            {
                "species_group": group,
                "min": int(counts.min()),
                "q1": float(q1),
                "median": float(med),
                "mean": float(counts.mean()),
                "q3": float(q3),
                "max": int(counts.max()),
                "total": int(counts.sum()),
            }
        )
    rows.sort(key=lambda r: -r["total"])
    return rows


def species_ranking(records: list[SurveillanceRecord]) -> list[dict]:
    """Total animals per species name, descending."""
    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.species_name] = totals.get(rec.species_name, 0) + rec.count
    return [
        {"species_name": name, "total": total}
        for name, total in sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def cumulative_series(
    panel: WeeklyPanel,
    region: int | None = None,
    group: str | None = None,
    age: str | None = None,
    gender: str | None = None,
) -> dict:
    """Cumulative weekly counts under an optional filter.

    Age and gender filters use the per-cell strata breakdown.  Also
    reports the average month-over-month growth as the harmonic mean of
    successive monthly ratios (the "average monthly odds ratio").
    """
    weekly = np.zeros(panel.n_weeks, dtype=float)
    monthly = np.zeros(MONTHS_PER_SEMESTER, dtype=float)
    for e in panel.entries:
        if region is not None and e.region_code != region:
            continue
        if group is not None and e.species_group != group:
            continue
        if age is None and gender is None:
            c = e.count
        else:
            c = sum(
                v
                for (a, g), v in e.strata.items()
                if (age is None or a == age) and (gender is None or g == gender)
            )
        weekly[e.week_index - 1] += c
        monthly[e.month_index - 1] += c

    cumulative = np.cumsum(weekly)
    ratios = [
        monthly[s] / monthly[s - 1]
        for s in range(1, MONTHS_PER_SEMESTER)
        if monthly[s - 1] > 0 and monthly[s] > 0
    ]
    avg_ratio = len(ratios) / sum(1.0 / r for r in ratios) if ratios else float("nan")
    return {
        "weeks": list(range(1, panel.n_weeks + 1)),
        "weekly": weekly.tolist(),
        "cumulative": cumulative.tolist(),
        "monthly": monthly.tolist(),
        "monthly_ratios": ratios,
        "average_monthly_ratio": avg_ratio,
        "total": float(cumulative[-1]) if len(cumulative) else 0.0,
    }
