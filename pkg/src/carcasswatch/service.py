"""Read-only JSON HTTP service over a fitted artifact.

The service never fits: it loads an immutable artifact and serves
summaries, series, control charts, alerts, and the posterior spatial
field.  All responses are pure functions of (artifact, query), so
repeated requests and service restarts return identical content.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pathlib import Path

from carcasswatch import monitor, summaries
from carcasswatch.artifact import FittedArtifact, to_native as _native
from carcasswatch.config import RunConfig
from carcasswatch.ingest import N_MONTHS, SPECIES_GROUPS, VALID_REGIONS
from carcasswatch.spatial import project_km, projection_matrix, unproject_km


def _vocabularies(artifact: FittedArtifact) -> dict:
    ages = set()
    genders = set()
    for entry in artifact.panel_data:
        for age, gender, _ in entry["strata"]:
            ages.add(age)
            genders.add(gender)
    return {
        "regions": sorted(VALID_REGIONS),
        "groups": list(SPECIES_GROUPS),
        "ages": sorted(ages),
        "genders": sorted(genders),
        "species": [row["species_name"] for row in artifact.species_table],
    }


def _field_raster(artifact: FittedArtifact, month: int, resolution: float) -> dict:
    mesh = artifact.mesh()
    values = artifact.spatial_block(month)
    lonlat = unproject_km(mesh.vertices, mesh.origin)
    lon_v, lat_v = lonlat[:, 0], lonlat[:, 1]
    lon_grid = np.arange(lon_v.min(), lon_v.max() + resolution, resolution)
    lat_grid = np.arange(lat_v.min(), lat_v.max() + resolution, resolution)
    lons, lats = np.meshgrid(lon_grid, lat_grid)
    pts = np.column_stack([lons.ravel(), lats.ravel()])
    km = project_km(pts, mesh.origin)
    inside = mesh.locator().find_simplex(km) >= 0
    grid = np.full(len(pts), np.nan)
    if np.any(inside):
        A = projection_matrix(mesh, km[inside], already_km=True)
        grid[inside] = A @ values
    cells = grid.reshape(lats.shape)
    return {
        "month": month,
        "resolution_deg": resolution,
        "lon": lon_grid.tolist(),
        "lat": lat_grid.tolist(),
        "values": [
            [None if not math.isfinite(v) else v for v in row] for row in cells.tolist()
        ],
    }


def create_app(
    artifact: FittedArtifact,
    config: RunConfig | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    config = config or RunConfig()
    app = FastAPI(title="carcasswatch", docs_url=None, redoc_url=None)
    panel = artifact.panel()
    vocab = _vocabularies(artifact)
    chart_cache: dict = {}
    present_cells = sorted(
        {(e["region"], e["group"]) for e in artifact.panel_data}
    )

    def chart_for(region: int, group: str, level: float, band: str):
        key = (region, group, level, band)
        if key not in chart_cache:
            chart_cache[key] = monitor.build_chart(
                artifact,
                region,
                group,
                level=level,
                band=band,
                n_draws=config.predictive_draws,
            )
        return chart_cache[key]

    def parse_level(level: Optional[str]) -> float:
        if level is None:
            return artifact.spc_level
        try:
            value = float(level)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"malformed level {level!r}")
        if not 0.0 < value < 1.0:
            raise HTTPException(status_code=400, detail="level must be in (0, 1)")
        return value

    @app.get("/health")
    def health():
        return {"status": "ok", "spec_hash": artifact.spec_hash,
                "format_version": artifact.version}

    @app.get("/regions")
    def regions():
        return _native(vocab)

    @app.get("/summary")
    def summary(by: str = Query(default="region")):
        if by == "region":
            return _native(summaries.region_summary(panel))
        if by == "group":
            return _native(summaries.group_summary(panel))
        if by == "species":
            return _native(artifact.species_table)
        raise HTTPException(
            status_code=400, detail=f"by must be region, group, or species; got {by!r}"
        )

    @app.get("/series")
    def series(
        region: Optional[str] = None,
        group: Optional[str] = None,
        age: Optional[str] = None,
        gender: Optional[str] = None,
    ):
        region_code = None
        if region is not None:
            try:
                region_code = int(region)
            except ValueError:
                raise HTTPException(status_code=400, detail=f"malformed region {region!r}")
            if region_code not in VALID_REGIONS:
                raise HTTPException(status_code=404, detail=f"unknown region {region_code}")
        if group is not None and group not in SPECIES_GROUPS:
            raise HTTPException(status_code=404, detail=f"unknown group {group!r}")
        if age is not None and age not in vocab["ages"]:
            raise HTTPException(status_code=404, detail=f"unknown age {age!r}")
        if gender is not None and gender not in vocab["genders"]:
            raise HTTPException(status_code=404, detail=f"unknown gender {gender!r}")
        return _native(
            summaries.cumulative_series(
                panel, region=region_code, group=group, age=age, gender=gender
            )
        )

    @app.get("/chart/{region}/{group}")
    def chart(region: str, group: str, level: Optional[str] = None,
              band: Optional[str] = None):
        try:
            region_code = int(region)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"malformed region {region!r}")
        value = parse_level(level)
        band_kind = band or config.band
        if band_kind not in ("predictive", "latent"):
            raise HTTPException(status_code=400, detail=f"unknown band {band_kind!r}")
        try:
            built = chart_for(region_code, group, value, band_kind)
        except LookupError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return _native(built.to_json())

    @app.get("/alerts")
    def alerts(level: Optional[str] = None):
        value = parse_level(level)
        charts = [
            chart_for(region, group, value, config.band)
            for region, group in present_cells
        ]
        report = monitor.alert_report(charts)
        return _native(report.to_json())

    @app.get("/field/{month}")
    def field(month: str):
        try:
            month_index = int(month)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"malformed month {month!r}")
        if not 1 <= month_index <= N_MONTHS:
            raise HTTPException(status_code=404, detail=f"unknown month {month_index}")
        return _native(_field_raster(artifact, month_index, config.field_resolution_deg))

    @app.get("/mesh")
    def mesh_endpoint():
        return _native(artifact.mesh_data)

    @app.exception_handler(LookupError)
    def lookup_handler(_, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve(artifact: FittedArtifact, config: RunConfig,
          static_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(artifact, config, static_dir=static_dir)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
