#!/usr/bin/env python3
"""Record dashboard test fixtures from the live HTTP surface.

Fits the bundled toy dataset deterministically, then snapshots the JSON
responses the dashboard consumes into frontend/test/fixtures/.  The
dashboard contract tests replay these files, so every number they check
is one the service actually served.
"""

from __future__ import annotations

import json
import warnings
from importlib import resources
from pathlib import Path

from fastapi.testclient import TestClient

from carcasswatch.config import RunConfig
from carcasswatch.estimator import StrandingModel
from carcasswatch.ingest import parse_csv
from carcasswatch.service import create_app

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "frontend" / "test" / "fixtures"

# Alerts recorded at level 0.5 so the fixture has above-band rows to
# exercise the non-empty rendering path.
ENDPOINTS = {
    "health.json": "/health",
    "regions.json": "/regions",
    "summary_region.json": "/summary?by=region",
    "summary_group.json": "/summary?by=group",
    "summary_species.json": "/summary?by=species",
    "series.json": "/series",
    "series_15_PI.json": "/series?region=15&group=PI",
    "chart_15_PI.json": "/chart/15/PI",
    "chart_15_PI_50.json": "/chart/15/PI?level=0.5",
    "alerts.json": "/alerts?level=0.5",
    "field_3.json": "/field/3",
    "mesh.json": "/mesh",
}


def main() -> None:
    toy = resources.files("carcasswatch").joinpath("data/strandings_toy.csv")
    records, rejects = parse_csv(str(toy))
    assert not rejects, rejects
    model = StrandingModel(max_evaluations=120)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        model.fit(records)
    app = create_app(model.to_artifact(), RunConfig())
    OUT.mkdir(parents=True, exist_ok=True)
    with TestClient(app) as client:
        for name, path in ENDPOINTS.items():
            res = client.get(path)
            res.raise_for_status()
            payload = res.json()
            text = json.dumps(payload, indent=1, sort_keys=True)
            (OUT / name).write_text(text + "\n")
            print(f"{name:24s} <- {path}")
        alerts = client.get("/alerts?level=0.5").json()
        if not alerts:
            raise SystemExit("alerts fixture is empty; lower the level")


if __name__ == "__main__":
    main()
