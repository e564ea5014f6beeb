"""Fixed-effects design matrix for the weekly panel.

Dummy coding with baseline BI in region 1: intercept, 5 species-group
indicators, 14 region indicators, and species:region interactions, one
row per (region, group, week) cell of the full grid, zeros included.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np
from scipy import sparse

from carcasswatch.ingest import N_WEEKS, SPECIES_GROUPS, VALID_REGIONS, WeeklyPanel

BASELINE_GROUP = "BI"
BASELINE_REGION = 1


class CodingError(ValueError):
    """Unknown species group or region code in a coding request."""


def month_of_panel_week(anchor_week: tuple[int, int], week_index: int) -> int:
    """Month slot 1..6 of a panel week under the Thursday convention."""
    t0 = date.fromisocalendar(anchor_week[0], anchor_week[1], 4)
    t = t0 + timedelta(weeks=week_index - 1)
    return min((t.year * 12 + t.month) - (t0.year * 12 + t0.month) + 1, 6)


def interaction_name(group: str, region: int) -> str:
    return f"species[{group}]:region[{region}]"


@dataclass(frozen=True)
class DesignMatrix:
    """Sparse dummy-coded fixed-effects matrix plus row bookkeeping.

    Rows follow region-major, then group, then week order over the full
    15 x 6 x 26 grid.  `y` holds the cell counts (0 where no reports),
    `lat`/`lon` the cell mean coordinates (NaN where no reports).
    """

    matrix: sparse.csr_matrix = field(compare=False)
    column_names: tuple[str, ...]
    region_code: np.ndarray = field(compare=False)
    species_group: tuple[str, ...]
    week_index: np.ndarray = field(compare=False)
    month_index: np.ndarray = field(compare=False)
    y: np.ndarray = field(compare=False)
    lat: np.ndarray = field(compare=False)
    lon: np.ndarray = field(compare=False)
    dropped_interactions: tuple[str, ...] = ()

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise CodingError(f"no design column named {name!r}") from None

    def decode_row(self, i: int) -> tuple[str, int]:
        """Recover the (species_group, region_code) pair of row i."""
        group = BASELINE_GROUP
        region = BASELINE_REGION
        row = self.matrix.getrow(i)
        for j in row.indices:
            name = self.column_names[j]
            if name.startswith("species[") and ":" not in name:
                group = name[len("species[") : -1]
            elif name.startswith("region["):
                region = int(name[len("region[") : -1])
        return group, region


def column_names(dropped: set[str] | None = None) -> tuple[str, ...]:
    """The 90 dummy-coding column names, minus any dropped interactions."""
    names = ["intercept"]
    names += [f"species[{g}]" for g in SPECIES_GROUPS if g != BASELINE_GROUP]
    names += [f"region[{r}]" for r in sorted(VALID_REGIONS) if r != BASELINE_REGION]
    for g in SPECIES_GROUPS:
        if g == BASELINE_GROUP:
            continue
        for r in sorted(VALID_REGIONS):
            if r == BASELINE_REGION:
                continue
            name = interaction_name(g, r)
            if dropped and name in dropped:
                continue
            names.append(name)
    return tuple(names)


def encode_cell(group: str, region: int, name_index: dict[str, int]) -> list[int]:
    """Active column indices for one (species_group, region) pair."""
    if group not in SPECIES_GROUPS:
        raise CodingError(f"unknown species group {group!r}")
    if region not in VALID_REGIONS:
        raise CodingError(f"unknown region code {region!r}")
    cols = [name_index["intercept"]]
    if group != BASELINE_GROUP:
        cols.append(name_index[f"species[{group}]"])
    if region != BASELINE_REGION:
        cols.append(name_index[f"region[{region}]"])
    if group != BASELINE_GROUP and region != BASELINE_REGION:
        inter = interaction_name(group, region)
        if inter in name_index:
            cols.append(name_index[inter])
    return cols


def build_design(panel: WeeklyPanel, drop_empty_interactions: bool = True) -> DesignMatrix:
    """Code the panel's full cell grid into the fixed-effects matrix.

    Interaction columns for species x region pairs with no reports at
    all are dropped (with a warning) when requested; their rows remain
    and are explained by the main effects alone.
    """
    if not panel.entries:
        raise CodingError("cannot build a design from an empty panel")

    observed_pairs = {(e.species_group, e.region_code) for e in panel.entries}
    dropped: set[str] = set()
    if drop_empty_interactions:
        for g in SPECIES_GROUPS:
            if g == BASELINE_GROUP:
                continue
            for r in sorted(VALID_REGIONS):
                if r == BASELINE_REGION:
                    continue
                if (g, r) not in observed_pairs:
                    dropped.add(interaction_name(g, r))
        if dropped:
            warnings.warn(
                f"dropping {len(dropped)} interaction columns with no observations",
                stacklevel=2,
            )

    names = column_names(dropped)
    name_index = {n: j for j, n in enumerate(names)}

    cells = {(e.region_code, e.species_group, e.week_index): e for e in panel.entries}
    anchor = panel.anchor_week

    rows_region, rows_group, rows_week, rows_month = [], [], [], []
    ys, lats, lons = [], [], []
    indptr = [0]
    indices: list[int] = []
    for r in sorted(VALID_REGIONS):
        for g in SPECIES_GROUPS:
            cols = encode_cell(g, r, name_index)
            for w in range(1, N_WEEKS + 1):
                e = cells.get((r, g, w))
                rows_region.append(r)
                rows_group.append(g)
                rows_week.append(w)
                rows_month.append(
                    e.month_index if e is not None else month_of_panel_week(anchor, w)
                )
                ys.append(e.count if e is not None else 0)
                lats.append(e.mean_latitude if e is not None else np.nan)
                lons.append(e.mean_longitude if e is not None else np.nan)
                indices.extend(cols)
                indptr.append(len(indices))

    data = np.ones(len(indices))
    matrix = sparse.csr_matrix(
        (data, np.asarray(indices), np.asarray(indptr)),
        shape=(len(ys), len(names)),
    )
    return DesignMatrix(
        matrix=matrix,
        column_names=names,
        region_code=np.asarray(rows_region),
        species_group=tuple(rows_group),
        week_index=np.asarray(rows_week),
        month_index=np.asarray(rows_month),
        y=np.asarray(ys, dtype=float),
        lat=np.asarray(lats),
        lon=np.asarray(lons),
        dropped_interactions=tuple(sorted(dropped)),
    )
