"""Shared fixtures: bundled datasets, synthetic CSV builder, fitted models.

The model fits are session-scoped because they take seconds (toy) to
minutes (full dataset); every test file that needs a fitted artifact
shares the same one.
"""

from __future__ import annotations

import warnings
from datetime import date
from importlib import resources

import pytest

HEADER = (
    "REGION,RECORD (n),LAT,LON,Sample TIME,SPECIES Type,SPECIES,"
    "INSTITUTIONS ENROLLED,GENDER,MARKS,REHABILITATION CENTER,AGE,CITY,"
    "VITAL CONDITION,SIZE,H5N1 SAMPLED,LOCATION INFO,STARTING DAY,"
    "ENDING DAY,CORPORAL CONDITION"
)


def csv_row(
    region=15,
    count=1,
    lat=-18.36,
    lon=-70.31,
    when="2023-01-04",
    group="PI",
    species="Otaria flavescens",
    gender="",
    age="",
    vital="Muerto",
) -> str:
    return (
        f"{region},{count},{lat},{lon},{when},{group},\"{species}\","
        f"SERNAPESCA,{gender},,,{age},Arica,{vital},,NO,costa,{when},{when},"
    )


def write_csv(path, rows: list[str]) -> str:
    path.write_text(HEADER + "\n" + "\n".join(rows) + ("\n" if rows else ""))
    return str(path)


def _data_path(name: str) -> str:
    return str(resources.files("carcasswatch").joinpath(f"data/{name}"))


@pytest.fixture(scope="session")
def toy_path() -> str:
    return _data_path("strandings_toy.csv")


@pytest.fixture(scope="session")
def full_path() -> str:
    return _data_path("strandings_2023s1.csv")


@pytest.fixture(scope="session")
def toy_records(toy_path):
    from carcasswatch.ingest import parse_csv

    records, rejects = parse_csv(toy_path)
    assert not rejects
    return records


@pytest.fixture(scope="session")
def full_records(full_path):
    from carcasswatch.ingest import parse_csv

    records, rejects = parse_csv(full_path)
    assert not rejects
    return records


@pytest.fixture(scope="session")
def full_panel(full_records):
    from carcasswatch.ingest import aggregate_weekly

    return aggregate_weekly(full_records)


@pytest.fixture(scope="session")
def toy_model(toy_records):
    from carcasswatch.estimator import StrandingModel

    model = StrandingModel(max_evaluations=120)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # empty-interaction drops
        model.fit(toy_records)
    return model


@pytest.fixture(scope="session")
def toy_artifact(toy_model):
    return toy_model.to_artifact()


@pytest.fixture(scope="session")
def real_model(full_records):
    """Full-dataset fit; takes minutes, shared by the sign-agreement and
    surge-window checks.  The coarse-but-sufficient mesh and evaluation
    cap keep the fit inside the suite's runtime budget."""
    from carcasswatch.estimator import StrandingModel

    model = StrandingModel(max_edge_km=110.0, max_evaluations=600)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        model.fit(full_records)
    return model


@pytest.fixture(scope="session")
def real_artifact(real_model):
    return real_model.to_artifact()


def iso_date(year: int, week: int, day: int = 4) -> str:
    return date.fromisocalendar(year, week, day).isoformat()
