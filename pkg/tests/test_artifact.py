"""Artifact serialization: deterministic zip layout and typed accessors."""

import dataclasses
import json
import zipfile

import numpy as np
import pytest

from carcasswatch.artifact import (
    ArtifactError,
    canonical_json,
    compute_spec_hash,
    load_artifact,
    save_artifact,
    to_native,
)

pytestmark = pytest.mark.usefixtures("toy_artifact")


@pytest.fixture(scope="module")
def saved(toy_artifact, tmp_path_factory):
    path = tmp_path_factory.mktemp("artifact") / "model.ccw"
    save_artifact(toy_artifact, path)
    return path


def test_round_trip_preserves_everything(toy_artifact, saved):
    back = load_artifact(saved)
    assert back.spec_hash == toy_artifact.spec_hash
    assert back.anchor_week == toy_artifact.anchor_week
    assert back.hyper_mode == pytest.approx(toy_artifact.hyper_mode)
    assert back.latent_names == toy_artifact.latent_names
    assert back.blocks == toy_artifact.blocks
    assert back.row_group == toy_artifact.row_group
    assert back.spc_level == toy_artifact.spc_level
    assert back.seeds == toy_artifact.seeds
    for name in (
        "latent_mean",
        "latent_sd",
        "row_region",
        "row_week",
        "row_month",
        "row_observed",
        "row_sampled",
        "eta_mean",
        "eta_sd",
    ):
        assert np.array_equal(getattr(back, name), getattr(toy_artifact, name)), name
    assert back.hyper_summaries.keys() == toy_artifact.hyper_summaries.keys()


def test_round_trip_rebuilds_panel_and_mesh(toy_artifact, saved):
    back = load_artifact(saved)
    panel = back.panel()
    orig = toy_artifact.panel()
    assert panel.anchor_week == orig.anchor_week
    assert len(panel.entries) == len(orig.entries)
    assert panel.entries[0] == orig.entries[0]
    mesh = back.mesh()
    assert np.array_equal(mesh.vertices, toy_artifact.mesh().vertices)
    assert np.array_equal(mesh.triangles, toy_artifact.mesh().triangles)


def test_resave_is_byte_identical(toy_artifact, saved, tmp_path):
    again = tmp_path / "again.ccw"
    save_artifact(toy_artifact, again)
    assert again.read_bytes() == saved.read_bytes()
    # load -> save survives the round trip byte for byte too
    third = tmp_path / "third.ccw"
    save_artifact(load_artifact(saved), third)
    assert third.read_bytes() == saved.read_bytes()


def test_unsupported_version_rejected(toy_artifact, tmp_path):
    path = tmp_path / "future.ccw"
    save_artifact(dataclasses.replace(toy_artifact, version="99"), path)
    with pytest.raises(ArtifactError, match="version"):
        load_artifact(path)


def test_garbage_files_rejected(tmp_path):
    text = tmp_path / "notes.txt"
    text.write_text("not a zip")
    with pytest.raises(ArtifactError):
        load_artifact(text)
    empty = tmp_path / "empty.ccw"
    with zipfile.ZipFile(empty, "w") as zf:
        zf.writestr("readme.md", "missing manifest")
    with pytest.raises(ArtifactError):
        load_artifact(empty)


def test_row_index_lookup(toy_artifact):
    a = toy_artifact
    i = 7
    triple = (int(a.row_region[i]), a.row_group[i], int(a.row_week[i]))
    assert a.row_index(*triple) == i
    with pytest.raises(LookupError):
        a.row_index(99, "PI", 1)


def test_latent_summary_accessor(toy_artifact):
    name = toy_artifact.latent_names[0]
    s = toy_artifact.latent_summary(name)
    assert s.name == name
    assert s.mean == toy_artifact.latent_mean[0]
    assert s.sd == toy_artifact.latent_sd[0]
    with pytest.raises(LookupError):
        toy_artifact.latent_summary("no such coefficient")


def test_fixed_effect_summaries_cover_fixed_block(toy_artifact):
    start, stop = toy_artifact.blocks["fixed"]
    out = toy_artifact.fixed_effect_summaries()
    assert tuple(out) == toy_artifact.latent_names[start:stop]
    assert all(s.sd > 0 for s in out.values())


def test_spatial_block_slices_by_month(toy_artifact):
    start, stop = toy_artifact.blocks["spatial"]
    per_month = (stop - start) // 6
    jan = toy_artifact.spatial_block(1)
    jun = toy_artifact.spatial_block(6)
    assert len(jan) == len(jun) == per_month
    assert np.array_equal(jan, toy_artifact.latent_mean[start : start + per_month])
    for bad in (0, 7):
        with pytest.raises(LookupError):
            toy_artifact.spatial_block(bad)


def test_canonical_json_is_stable():
    s = canonical_json({"b": 1, "a": [1.5, None, "x"]})
    assert s == '{"a":[1.5,null,"x"],"b":1}'
    with pytest.raises(ValueError):
        canonical_json({"a": float("nan")})


def test_to_native_converts_numpy_and_nonfinite():
    out = to_native(
        {
            "i": np.int64(3),
            "f": np.float64(2.5),
            "b": np.bool_(True),
            "arr": np.array([1.0, np.inf]),
            "nan": float("nan"),
            "nested": [np.int32(1), (np.float32(0.5),)],
        }
    )
    assert out == {
        "i": 3,
        "f": 2.5,
        "b": True,
        "arr": [1.0, None],
        "nan": None,
        "nested": [1, [0.5]],
    }
    json.dumps(out, allow_nan=False)


def test_spec_hash_tracks_inputs():
    names = ("a", "b")
    anchor = (2023, 1)
    rows = {"y": np.array([1.0, 2.0]), "group": ("PI", "CE")}
    mesh = {"vertices": [[0.0, 0.0]]}
    h1 = compute_spec_hash(names, anchor, rows, mesh)
    assert h1 == compute_spec_hash(names, anchor, rows, mesh)
    rows2 = {"y": np.array([1.0, 3.0]), "group": ("PI", "CE")}
    assert h1 != compute_spec_hash(names, anchor, rows2, mesh)
    assert h1 != compute_spec_hash(names, (2023, 2), rows, mesh)
    assert len(h1) == 64
