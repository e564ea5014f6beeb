"""Descriptive tables against the published per-region/group/species values."""

from datetime import date, timedelta

import pytest

from carcasswatch.ingest import SurveillanceRecord, aggregate_weekly
from carcasswatch.summaries import (
    cumulative_series,
    group_summary,
    region_summary,
    species_ranking,
)


def _by(rows, key, value):
    return next(r for r in rows if r[key] == value)


def test_region_totals_full_dataset(full_panel):
    # published per-region ranking spot values
    rows = region_summary(full_panel)
    assert _by(rows, "region", 2)["total"] == 5494
    r15 = _by(rows, "region", 15)
    assert r15["total"] == 4603
    assert r15["weekly_mean"] == 13.5


def test_region_totals_sum_to_panel_total(full_panel):
    rows = region_summary(full_panel)
    assert sum(r["total"] for r in rows) == full_panel.total()


def test_region_summary_sorted_descending(full_panel):
    totals = [r["total"] for r in region_summary(full_panel)]
    assert totals == sorted(totals, reverse=True)


def _single_entry_panel(count):
    rec = SurveillanceRecord(
        region_code=1, latitude=-20.0, longitude=-70.0,
        sample_time=date(2023, 3, 1), species_group="CE", species_name="x",
        gender="unknown", age="unknown", vital_condition="dead", count=count,
    )
    return aggregate_weekly([rec])


def test_region_summary_singleton():
    rows = region_summary(_single_entry_panel(7))
    assert rows == [
        {"region": 1, "total": 7, "weekly_mean": 7.0, "max": 7, "n_visits": 1}
    ]


def test_group_summary_full_dataset(full_panel):
    # published per-group totals and maxima
    rows = group_summary(full_panel)
    pi = _by(rows, "species_group", "PI")
    bi = _by(rows, "species_group", "BI")
    assert (pi["total"], pi["max"]) == (14887, 175)
    assert (bi["total"], bi["max"]) == (2646, 105)
    assert {r["species_group"]: r["total"] for r in rows} == {
        "PI": 14887, "BI": 2646, "CE": 91, "MU": 35, "QU": 24, "UND": 8,
    }


def test_group_summary_single_cell_quantiles():
    rows = group_summary(_single_entry_panel(4))
    (row,) = rows
    assert row["min"] == row["q1"] == row["median"] == row["q3"] == row["max"] == 4


def test_species_ranking_full_dataset(full_records):
    # published species ranking head
    rows = species_ranking(full_records)
    totals = {r["species_name"]: r["total"] for r in rows}
    assert totals["Lobo Marino Común, Lobo de Un Pelo - Otaria flavescens"] == 14840
    assert totals["Pingüino de Humboldt - Spheniscus humboldti"] == 2224
    assert totals["Pingüino de Magallanes - Spheniscus magellanicus"] == 421
    assert rows[0]["species_name"].endswith("Otaria flavescens")


def test_species_ranking_empty():
    assert species_ranking([]) == []


def test_cumulative_series_full_dataset(full_panel):
    # published figure: "expected harmonic monthly increase was 164%"
    series = cumulative_series(full_panel)
    assert series["total"] == 17691.0
    assert series["average_monthly_ratio"] == pytest.approx(1.64, abs=0.01)
    diffs = [b - a for a, b in zip(series["cumulative"], series["cumulative"][1:])]
    assert all(d >= 0 for d in diffs)


def test_cumulative_series_single_week():
    panel = _single_entry_panel(3)
    series = cumulative_series(panel)
    assert series["cumulative"][0] == 3.0
    assert set(series["cumulative"][1:]) == {3.0}


def test_cumulative_series_powers_of_two_oracle():
    # Oracle first: weekly counts 1,2,4,...,2^25; brute-force the monthly
    # sums and their successive ratios, then the harmonic mean.
    start = date(2023, 1, 2)
    records = []
    for w in range(26):
        records.append(
            SurveillanceRecord(
                region_code=1, latitude=-20.0, longitude=-70.0,
                sample_time=start + timedelta(weeks=w), species_group="PI",
                species_name="x", gender="unknown", age="unknown",
                vital_condition="dead", count=2 ** w,
            )
        )
    panel = aggregate_weekly(records)
    monthly = [0.0] * 6
    for e in panel.entries:
        monthly[e.month_index - 1] += e.count
    ratios = [
        monthly[s] / monthly[s - 1]
        for s in range(1, 6)
        if monthly[s - 1] > 0 and monthly[s] > 0
    ]
    harmonic = len(ratios) / sum(1.0 / r for r in ratios)

    series = cumulative_series(panel)
    assert series["monthly"] == monthly
    assert series["monthly_ratios"] == pytest.approx(ratios)
    assert series["average_monthly_ratio"] == pytest.approx(harmonic, rel=1e-12)
    assert series["cumulative"][-1] == 2 ** 26 - 1


def test_cumulative_series_filters(full_panel):
    both = cumulative_series(full_panel, region=15)
    pi = cumulative_series(full_panel, region=15, group="PI")
    assert pi["total"] <= both["total"]
    by_gender = sum(
        cumulative_series(full_panel, gender=g)["total"]
        for g in ("male", "female", "unknown")
    )
    assert by_gender == full_panel.total()
