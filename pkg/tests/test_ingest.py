"""Parsing, validation, and weekly aggregation contracts."""

from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carcasswatch.ingest import (
    SPECIES_GROUPS,
    VALID_REGIONS,
    SchemaError,
    SurveillanceRecord,
    WeekRangeError,
    aggregate_weekly,
    parse_csv,
    panel_to_records,
    rejects_to_jsonl,
)
from tests.conftest import csv_row, iso_date, write_csv


def test_full_dataset_total_animals(full_records):
    # published grand total: 17,691 registered marine animals
    assert sum(r.count for r in full_records) == 17691


def test_empty_file_header_only(tmp_path):
    path = write_csv(tmp_path / "empty.csv", [])
    records, rejects = parse_csv(path)
    assert records == [] and rejects == []


def test_region_13_rejected(tmp_path):
    path = write_csv(tmp_path / "r13.csv", [csv_row(region=13)])
    records, rejects = parse_csv(path)
    assert records == []
    assert len(rejects) == 1 and rejects[0].reason == "invalid-region"


def test_out_of_bounds_coordinates_rejected(tmp_path):
    rows = [csv_row(lat=-10.0), csv_row(lon=-60.0), csv_row(lat="bad")]
    path = write_csv(tmp_path / "coords.csv", rows)
    records, rejects = parse_csv(path)
    assert records == []
    assert {r.reason for r in rejects} == {"invalid-coordinates"}


def test_nonpositive_count_rejected(tmp_path):
    path = write_csv(tmp_path / "count.csv", [csv_row(count=0), csv_row(count=-2)])
    records, rejects = parse_csv(path)
    assert records == []
    assert {r.reason for r in rejects} == {"invalid-count"}


def test_blank_count_defaults_to_one(tmp_path):
    path = write_csv(tmp_path / "blank.csv", [csv_row(count="")])
    records, rejects = parse_csv(path)
    assert not rejects and records[0].count == 1


def test_unknown_group_maps_to_und(tmp_path):
    path = write_csv(tmp_path / "und.csv", [csv_row(group=""), csv_row(group="xyz")])
    records, _ = parse_csv(path)
    assert [r.species_group for r in records] == ["UND", "UND"]


def test_missing_required_column_raises_schema_error(tmp_path):
    path = tmp_path / "noregion.csv"
    path.write_text("LAT,LON,Sample TIME\n-18.0,-70.0,2023-01-04\n")
    with pytest.raises(SchemaError, match="region_code"):
        parse_csv(path)


def test_parsing_is_total(tmp_path):
    # Malformed rows land in rejects, never abort; accepted + rejected = input.
    rows = [
        csv_row(),
        csv_row(region="abc"),
        csv_row(when="not-a-date"),
        csv_row(count="many"),
        csv_row(region=13),
        csv_row(count=3),
    ]
    path = write_csv(tmp_path / "mixed.csv", rows)
    records, rejects = parse_csv(path)
    assert len(records) + len(rejects) == len(rows)
    assert len(records) == 2
    report = rejects_to_jsonl(rejects)
    assert report.count("\n") == len(rejects)


def test_aggregate_full_dataset_conserves_total(full_panel):
    assert full_panel.total() == 17691


def test_aggregate_singleton():
    rec = SurveillanceRecord(
        region_code=2, latitude=-23.0, longitude=-70.0,
        sample_time=date(2023, 2, 1), species_group="PI", species_name="x",
        gender="unknown", age="unknown", vital_condition="dead", count=5,
    )
    panel = aggregate_weekly([rec])
    assert len(panel.entries) == 1
    e = panel.entries[0]
    assert (e.region_code, e.species_group, e.week_index, e.count) == (2, "PI", 1, 5)


def test_aggregate_additivity_same_cell():
    base = dict(
        region_code=2, latitude=-23.0, longitude=-70.0,
        sample_time=date(2023, 2, 1), species_group="PI", species_name="x",
        gender="unknown", age="unknown", vital_condition="dead",
    )
    recs = [SurveillanceRecord(count=2, **base), SurveillanceRecord(count=3, **base)]
    panel = aggregate_weekly(recs)
    assert len(panel.entries) == 1
    assert panel.entries[0].count == 5
    assert panel.entries[0].n_visits == 2


def test_aggregate_rejects_week_range_overflow(tmp_path):
    rows = [csv_row(when=iso_date(2023, 1)), csv_row(when=iso_date(2023, 28))]
    path = write_csv(tmp_path / "span.csv", rows)
    records, _ = parse_csv(path)
    with pytest.raises(WeekRangeError):
        aggregate_weekly(records)


def test_month_index_consistent_with_week(full_panel):
    # month_index is a function of week_index alone, under the fixed
    # week -> month-of-Thursday map.
    month_of_week = {}
    for e in full_panel.entries:
        assert 1 <= e.week_index <= 26 and 1 <= e.month_index <= 6
        assert month_of_week.setdefault(e.week_index, e.month_index) == e.month_index


_record_strategy = st.builds(
    SurveillanceRecord,
    region_code=st.sampled_from(sorted(VALID_REGIONS)),
    latitude=st.floats(min_value=-55.0, max_value=-18.0),
    longitude=st.floats(min_value=-75.0, max_value=-67.0),
    sample_time=st.dates(min_value=date(2023, 1, 2), max_value=date(2023, 6, 25)),
    species_group=st.sampled_from(SPECIES_GROUPS),
    species_name=st.just("spp"),
    gender=st.sampled_from(("male", "female", "unknown")),
    age=st.sampled_from(("adult", "juvenile", "unknown")),
    vital_condition=st.just("dead"),
    count=st.integers(min_value=1, max_value=50),
)


@given(st.lists(_record_strategy, max_size=60))
@settings(max_examples=60, deadline=None)
def test_conservation_fuzz(records):
    panel = aggregate_weekly(records)
    assert panel.total() == sum(r.count for r in records)


@given(st.lists(_record_strategy, min_size=1, max_size=40))
@settings(max_examples=40, deadline=None)
def test_aggregation_idempotence(records):
    panel = aggregate_weekly(records)
    again = aggregate_weekly(panel_to_records(panel), anchor_week=panel.anchor_week)
    key = lambda p: [
        (e.region_code, e.species_group, e.week_index, e.month_index, e.count)
        for e in p.entries
    ]
    assert key(again) == key(panel)
