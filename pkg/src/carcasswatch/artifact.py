"""Fitted-model artifact: a deterministic, versioned zip file.

Layout: `manifest.json` (canonical JSON envelope) plus `arrays/*.npy`
binary payloads.  Re-saving the same fit produces byte-identical files:
zip entries carry a fixed timestamp and no compression, and the JSON is
serialized with sorted keys.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from carcasswatch.ingest import N_MONTHS, PanelEntry, WeeklyPanel
from carcasswatch.laplace import PosteriorSummary, gaussian_summary
from carcasswatch.spatial import Mesh

FORMAT_VERSION = "1"
_EPOCH = (1980, 1, 1, 0, 0, 0)  # earliest zip timestamp; fixed for determinism


class ArtifactError(ValueError):
    """Malformed or incompatible artifact file."""


def canonical_json(obj) -> str:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def to_native(obj):
    """Recursively convert numpy scalars/arrays (and non-finite floats to
    None) so the object serializes as plain JSON."""
    import math

    if isinstance(obj, dict):
        return {k: to_native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_native(v) for v in obj]
    if isinstance(obj, (np.integer, np.bool_)):
        return int(obj) if isinstance(obj, np.integer) else bool(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, np.ndarray):
        return [to_native(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


@dataclass(frozen=True)
class FittedArtifact:
    """Everything the monitoring and serving layers need, model-free."""

    spec_hash: str
    anchor_week: tuple
    hyper_mode: dict
    hyper_summaries: dict  # name -> {mean, sd, q10, q50, q90, mode, significant}
    latent_names: tuple
    latent_mean: np.ndarray = field(compare=False)
    latent_sd: np.ndarray = field(compare=False)
    blocks: dict  # block name -> (start, stop)
    row_region: np.ndarray = field(compare=False)
    row_group: tuple
    row_week: np.ndarray = field(compare=False)
    row_month: np.ndarray = field(compare=False)
    row_observed: np.ndarray = field(compare=False)
    row_sampled: np.ndarray = field(compare=False)
    eta_mean: np.ndarray = field(compare=False)
    eta_sd: np.ndarray = field(compare=False)
    mesh_data: dict = field(compare=False)
    panel_data: list = field(compare=False)
    species_table: list = field(compare=False)
    seeds: dict = field(compare=False)
    spc_level: float = 0.80
    version: str = FORMAT_VERSION

    @property
    def n_rows(self) -> int:
        return len(self.row_observed)

    def row_index(self, region: int, group: str, week: int) -> int:
        groups = np.asarray(self.row_group)
        hits = np.where(
            (self.row_region == region) & (groups == group) & (self.row_week == week)
        )[0]
        if len(hits) != 1:
            raise LookupError(
                f"cell (region={region}, group={group}, week={week}) not in artifact"
            )
        return int(hits[0])

    def mesh(self) -> Mesh:
        return Mesh.from_json(self.mesh_data)

    def panel(self) -> WeeklyPanel:
        entries = tuple(
            PanelEntry(
                region_code=e["region"],
                species_group=e["group"],
                week_index=e["week"],
                month_index=e["month"],
                count=e["count"],
                mean_latitude=e["lat"],
                mean_longitude=e["lon"],
                n_visits=e["n_visits"],
                visit_counts={int(k): int(v) for k, v in e["visit_counts"]},
                strata={(a, g): int(v) for a, g, v in e["strata"]},
            )
            for e in self.panel_data
        )
        return WeeklyPanel(entries=entries, anchor_week=tuple(self.anchor_week))

    def latent_summary(self, name: str) -> PosteriorSummary:
        try:
            idx = self.latent_names.index(name)
        except ValueError:
            raise LookupError(f"no latent coefficient named {name!r}") from None
        return gaussian_summary(name, self.latent_mean[idx], self.latent_sd[idx])

    def fixed_effect_summaries(self) -> dict:
        start, stop = self.blocks["fixed"]
        return {
            self.latent_names[i]: gaussian_summary(
                self.latent_names[i], self.latent_mean[i], self.latent_sd[i]
            )
            for i in range(start, stop)
        }

    def spatial_block(self, month: int) -> np.ndarray:
        """Posterior mean of the spatial field at mesh vertices for a month."""
        start, stop = self.blocks["spatial"]
        m = (stop - start) // N_MONTHS
        if not 1 <= month <= N_MONTHS:
            raise LookupError(f"month {month} outside 1..{N_MONTHS}")
        return self.latent_mean[start + (month - 1) * m : start + month * m]


def panel_to_payload(panel: WeeklyPanel) -> list:
    return [
        {
            "region": e.region_code,
            "group": e.species_group,
            "week": e.week_index,
            "month": e.month_index,
            "count": e.count,
            "lat": e.mean_latitude,
            "lon": e.mean_longitude,
            "n_visits": e.n_visits,
            "visit_counts": sorted([int(k), int(v)] for k, v in e.visit_counts.items()),
            "strata": sorted([a, g, int(v)] for (a, g), v in e.strata.items()),
        }
        for e in panel.entries
    ]


def compute_spec_hash(
    latent_names: tuple,
    anchor_week: tuple,
    row_arrays: dict,
    mesh_data: dict,
) -> str:
    digest = hashlib.sha256()
    digest.update(canonical_json(list(latent_names)).encode())
    digest.update(canonical_json(list(anchor_week)).encode())
    for key in sorted(row_arrays):
        digest.update(key.encode())
        arr = row_arrays[key]
        if isinstance(arr, np.ndarray):
            digest.update(np.ascontiguousarray(arr).tobytes())
        else:
            digest.update(canonical_json(list(arr)).encode())
    digest.update(canonical_json(mesh_data).encode())
    return digest.hexdigest()


_ARRAY_FIELDS = (
    "latent_mean",
    "latent_sd",
    "row_region",
    "row_week",
    "row_month",
    "row_observed",
    "row_sampled",
    "eta_mean",
    "eta_sd",
)


def save_artifact(artifact: FittedArtifact, path: str | Path) -> Path:
    path = Path(path)
    manifest = {
        "format_version": artifact.version,
        "spec_hash": artifact.spec_hash,
        "anchor_week": list(artifact.anchor_week),
        "hyper_mode": artifact.hyper_mode,
        "hyper_summaries": artifact.hyper_summaries,
        "latent_names": list(artifact.latent_names),
        "blocks": {k: list(v) for k, v in artifact.blocks.items()},
        "row_group": list(artifact.row_group),
        "mesh": artifact.mesh_data,
        "panel": artifact.panel_data,
        "species_table": artifact.species_table,
        "seeds": artifact.seeds,
        "spc_level": artifact.spc_level,
        "arrays": list(_ARRAY_FIELDS),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=_EPOCH)
        zf.writestr(info, canonical_json(manifest))
        for name in _ARRAY_FIELDS:
            buf = io.BytesIO()
            np.save(buf, getattr(artifact, name), allow_pickle=False)
            info = zipfile.ZipInfo(f"arrays/{name}.npy", date_time=_EPOCH)
            zf.writestr(info, buf.getvalue())
    return path


def load_artifact(path: str | Path) -> FittedArtifact:
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            arrays = {}
            for name in manifest["arrays"]:
                arrays[name] = np.load(io.BytesIO(zf.read(f"arrays/{name}.npy")),
                                       allow_pickle=False)
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read artifact {path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(
            f"unsupported artifact version {manifest.get('format_version')!r}"
        )
    return FittedArtifact(
        spec_hash=manifest["spec_hash"],
        anchor_week=tuple(manifest["anchor_week"]),
        hyper_mode=manifest["hyper_mode"],
        hyper_summaries=manifest["hyper_summaries"],
        latent_names=tuple(manifest["latent_names"]),
        blocks={k: tuple(v) for k, v in manifest["blocks"].items()},
        row_group=tuple(manifest["row_group"]),
        mesh_data=manifest["mesh"],
        panel_data=manifest["panel"],
        species_table=manifest["species_table"],
        seeds=manifest["seeds"],
        spc_level=manifest["spc_level"],
        version=manifest["format_version"],
        **arrays,
    )
