"""Parsing, validation and weekly aggregation of stranding records.

The raw input is a 20-column CSV of individual stranding reports ("field
visits").  Each row carries a pre-aggregated animal count, a coastal
coordinate, a sampling date and a handful of categorical descriptors.
Parsing is total: malformed rows are returned as :class:`RejectedRow`
with a machine-readable reason code, never raised.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

SPECIES_GROUPS = ("BI", "PI", "CE", "MU", "QU", "UND")
VALID_REGIONS = frozenset(range(1, 13)) | frozenset(range(14, 17))  # no region 13
LAT_BOUNDS = (-56.0, -17.0)
LON_BOUNDS = (-76.0, -66.0)
N_WEEKS = 26
N_MONTHS = 6
N_REGIONS = 15
N_GROUPS = 6

CANONICAL_FIELDS = (
    "region_code",
    "count",
    "latitude",
    "longitude",
    "sample_time",
    "species_group",
    "species_name",
    "institutions",
    "gender",
    "marks",
    "rehabilitation_center",
    "age",
    "city",
    "vital_condition",
    "size",
    "h5n1_sampled",
    "location_info",
    "starting_day",
    "ending_day",
    "corporal_condition",
)

REQUIRED_FIELDS = ("region_code", "latitude", "longitude", "sample_time")

_GENDER_TOKENS = {
    "male": "male", "m": "male", "macho": "male",
    "female": "female", "f": "female", "hembra": "female",
}
_AGE_TOKENS = {
    "adult": "adult", "adulto": "adult", "adulta": "adult",
    "juvenile": "juvenile", "juvenil": "juvenile", "cria": "juvenile",
}
_VITAL_TOKENS = {
    "dead": "dead", "muerto": "dead", "muerta": "dead",
    "alive": "alive", "vivo": "alive", "viva": "alive",
}


class IngestError(Exception):
    """Base class for ingestion failures that cannot be expressed per-row."""


class SchemaError(IngestError):
    """The CSV header does not provide a required canonical column."""


class WeekRangeError(IngestError):
    """Records span more than the supported number of distinct weeks."""


@dataclass(frozen=True)
class SurveillanceRecord:
    """One validated stranding report."""

    region_code: int
    latitude: float
    longitude: float
    sample_time: date
    species_group: str
    species_name: str
    gender: str
    age: str
    vital_condition: str
    count: int
    extras: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class RejectedRow:
    """A row that failed validation, with the first reason encountered."""

    line_number: int
    reason: str
    raw: dict


@dataclass(frozen=True)
class PanelEntry:
    """Aggregated weekly cell for one (region, species group, week).

    ``visit_counts`` keeps the multiset of per-visit animal tallies that
    were merged into the cell (tally value -> number of visits), so
    per-visit descriptive statistics stay computable from the panel.
    """

    region_code: int
    species_group: str
    week_index: int
    month_index: int
    count: int
    mean_latitude: float
    mean_longitude: float
    n_visits: int
    visit_counts: dict = field(default_factory=dict, compare=False)
    strata: dict = field(default_factory=dict, compare=False)  # (age, gender) -> count


@dataclass(frozen=True)
class WeeklyPanel:
    """Weekly counts by (region, species group, week) over one semester.

    ``anchor_week`` is the ISO (year, week) that week index 1 maps to, so a
    panel can be turned back into representative records.
    """

    entries: tuple[PanelEntry, ...]
    anchor_week: tuple[int, int]
    n_weeks: int = N_WEEKS
    n_regions: int = N_REGIONS
    n_groups: int = N_GROUPS

    def total(self) -> int:
        return sum(e.count for e in self.entries)

    def cell(self, region_code: int, species_group: str, week_index: int) -> PanelEntry | None:
        for e in self.entries:
            if (e.region_code, e.species_group, e.week_index) == (region_code, species_group, week_index):
                return e
        return None


def load_column_map(path: str | Path) -> dict[str, str]:
    """Read a JSON mapping of actual CSV headers to canonical field names."""
    with open(path, encoding="utf-8") as fh:
        mapping = json.load(fh)
    bad = sorted(set(mapping.values()) - set(CANONICAL_FIELDS))
    if bad:
        raise SchemaError(f"column map targets unknown canonical fields: {bad}")
    return {str(k): str(v) for k, v in mapping.items()}


def default_column_map() -> dict[str, str]:
    """Column map for the bundled SERNAPESCA-style header layout."""
    return load_column_map(Path(__file__).parent / "data" / "columns_sernapesca.json")


def _parse_date(text: str) -> date:
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%d-%m-%Y", "%d/%m/%Y", "%Y/%m/%d"):
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date: {text!r}")


def _norm_enum(raw: str, table: dict[str, str]) -> str:
    return table.get(raw.strip().lower(), "unknown")


def _norm_group(raw: str) -> str:
    token = raw.strip().upper()
    return token if token in SPECIES_GROUPS else "UND"


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    # UTF-8 first; Spanish species names in legacy exports may be Latin-1.
    for encoding in ("utf-8", "latin-1"):
        try:
            with open(path, newline="", encoding=encoding) as fh:
                reader = csv.reader(fh)
                rows = list(reader)
            break
        except UnicodeDecodeError:
            continue
    else:  # pragma: no cover - latin-1 never raises UnicodeDecodeError
        raise IngestError(f"cannot decode {path}")
    if not rows:
        raise SchemaError("input file has no header row")
    return rows[0], rows[1:]


def parse_csv(
    path: str | Path,
    schema: dict[str, str] | str | Path | None = None,
) -> tuple[list[SurveillanceRecord], list[RejectedRow]]:
    """Parse a stranding CSV into validated records plus per-row rejects.

    ``schema`` maps the file's actual header strings to canonical field
    names; by default the bundled SERNAPESCA layout is assumed.  Every
    input row lands in exactly one of the two returned lists.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file not found: {path}")
    if schema is None:
        schema = default_column_map()
    elif not isinstance(schema, dict):
        schema = load_column_map(schema)

    header, rows = _read_rows(path)
    col_of = {}
    for idx, name in enumerate(header):
        canon = schema.get(name.strip())
        if canon:
            col_of[canon] = idx
    for req in REQUIRED_FIELDS:
        if req not in col_of:
            raise SchemaError(f"required column missing from header: {req}")

    records: list[SurveillanceRecord] = []
    rejects: list[RejectedRow] = []

    def get(row: list[str], name: str) -> str:
        idx = col_of.get(name)
        if idx is None or idx >= len(row):
            return ""
        return row[idx]

    for lineno, row in enumerate(rows, start=2):
        if not any(cell.strip() for cell in row):
            continue
        raw = {name: get(row, name) for name in CANONICAL_FIELDS}

        def reject(reason: str) -> None:
            rejects.append(RejectedRow(line_number=lineno, reason=reason, raw=raw))

        try:
            region = int(float(raw["region_code"]))
        except ValueError:
            reject("invalid-region")
            continue
        if region not in VALID_REGIONS:
            reject("invalid-region")
            continue

        try:
            lat = float(raw["latitude"])
            lon = float(raw["longitude"])
        except ValueError:
            reject("invalid-coordinates")
            continue
        if not (LAT_BOUNDS[0] <= lat <= LAT_BOUNDS[1] and LON_BOUNDS[0] <= lon <= LON_BOUNDS[1]):
            reject("invalid-coordinates")
            continue

        try:
            when = _parse_date(raw["sample_time"])
        except ValueError:
            reject("invalid-date")
            continue

        count_text = raw["count"].strip()
        if count_text:
            try:
                count = int(float(count_text))
            except ValueError:
                reject("invalid-count")
                continue
            if count < 1:
                reject("invalid-count")
                continue
        else:
            count = 1  # single animal per sighting when the tally is absent

        records.append(
            SurveillanceRecord(
                region_code=region,
                latitude=lat,
                longitude=lon,
                sample_time=when,
                species_group=_norm_group(raw["species_group"]),
                species_name=raw["species_name"].strip() or "Undefined",
                gender=_norm_enum(raw["gender"], _GENDER_TOKENS),
                age=_norm_enum(raw["age"], _AGE_TOKENS),
                vital_condition=_norm_enum(raw["vital_condition"], _VITAL_TOKENS),
                count=count,
                extras={
                    k: raw[k]
                    for k in CANONICAL_FIELDS
                    if k
                    not in (
                        "region_code", "count", "latitude", "longitude", "sample_time",
                        "species_group", "species_name", "gender", "age", "vital_condition",
                    )
                },
            )
        )
    return records, rejects


def _iso_week(d: date) -> tuple[int, int]:
    iso = d.isocalendar()
    return (iso[0], iso[1])


def _week_ordinal(iso_year: int, iso_week: int) -> int:
    # Monday of the ISO week, as a day ordinal; consecutive weeks differ by 7.
    return date.fromisocalendar(iso_year, iso_week, 1).toordinal() // 7


def _month_of_week(iso_year: int, iso_week: int) -> int:
    return date.fromisocalendar(iso_year, iso_week, 4).month  # ISO: month of the Thursday


def month_index_of_week(anchor_week: tuple[int, int], iso_year: int, iso_week: int) -> int:
    """Panel month slot 1..6 of an ISO week: calendar months of the weeks'
    Thursdays, renumbered from the anchor week's month.  A 26-week window
    straddles at most 7 calendar months; the rare 7th is clamped to 6 so the
    month blocks stay within one semester."""
    t = date.fromisocalendar(iso_year, iso_week, 4)
    t0 = date.fromisocalendar(anchor_week[0], anchor_week[1], 4)
    return min((t.year * 12 + t.month) - (t0.year * 12 + t0.month) + 1, N_MONTHS)


def aggregate_weekly(
    records: list[SurveillanceRecord],
    anchor_week: tuple[int, int] | None = None,
) -> WeeklyPanel:
    """Group record counts into (region, species group, ISO week) cells.

    Weeks are renumbered 1..26 starting from the earliest week containing
    data (or from ``anchor_week`` when given).  Coordinates are averaged
    per cell with animal-count weights.  Raises :class:`WeekRangeError`
    when the records span more than 26 distinct weeks.
    """
    if not records:
        return WeeklyPanel(entries=(), anchor_week=anchor_week or (0, 0))

    weeks = {_iso_week(r.sample_time) for r in records}
    if anchor_week is None:
        anchor_week = min(weeks, key=lambda w: _week_ordinal(*w))
    anchor_ord = _week_ordinal(*anchor_week)
    span = max(_week_ordinal(*w) for w in weeks) - anchor_ord + 1
    if span > N_WEEKS:
        raise WeekRangeError(f"records span {span} distinct weeks; at most {N_WEEKS} supported")

    cells: dict[tuple[int, str, int], dict] = {}
    for rec in records:
        iso = _iso_week(rec.sample_time)
        week_index = _week_ordinal(*iso) - anchor_ord + 1
        key = (rec.region_code, rec.species_group, week_index)
        cell = cells.setdefault(
            key,
            {"count": 0, "lat": 0.0, "lon": 0.0, "visits": 0, "iso": iso,
             "visit_counts": {}, "strata": {}},
        )
        cell["count"] += rec.count
        cell["lat"] += rec.latitude * rec.count
        cell["lon"] += rec.longitude * rec.count
        cell["visits"] += 1
        cell["visit_counts"][rec.count] = cell["visit_counts"].get(rec.count, 0) + 1
        stratum = (rec.age, rec.gender)
        cell["strata"][stratum] = cell["strata"].get(stratum, 0) + rec.count

    entries = []
    for (region, group, week_index), cell in sorted(cells.items()):
        entries.append(
            PanelEntry(
                region_code=region,
                species_group=group,
                week_index=week_index,
                month_index=month_index_of_week(anchor_week, *cell["iso"]),
                count=cell["count"],
                mean_latitude=cell["lat"] / cell["count"],
                mean_longitude=cell["lon"] / cell["count"],
                n_visits=cell["visits"],
                visit_counts=dict(cell["visit_counts"]),
                strata=dict(cell["strata"]),
            )
        )
    return WeeklyPanel(entries=tuple(entries), anchor_week=anchor_week)


def panel_to_records(panel: WeeklyPanel) -> list[SurveillanceRecord]:
    """Expand a panel back into one representative record per cell.

    The record is dated on the cell week's Thursday so re-aggregation with
    the panel's anchor reproduces the same cells (visit multiplicity and
    age/gender strata collapse to the cell totals).
    """
    out = []
    year, week = panel.anchor_week
    for e in panel.entries:
        monday = date.fromisocalendar(year, week, 1) + timedelta(weeks=e.week_index - 1)
        out.append(
            SurveillanceRecord(
                region_code=e.region_code,
                latitude=e.mean_latitude,
                longitude=e.mean_longitude,
                sample_time=monday + timedelta(days=3),
                species_group=e.species_group,
                species_name="",
                gender="unknown",
                age="unknown",
                vital_condition="unknown",
                count=e.count,
            )
        )
    return out


def rejects_to_jsonl(rejects: list[RejectedRow]) -> str:
    """Serialize rejected rows as JSON lines with reason codes."""
    lines = [
        json.dumps(
            {"line": r.line_number, "reason": r.reason, "row": r.raw},
            ensure_ascii=False,
            sort_keys=True,
        )
        for r in rejects
    ]
    return "\n".join(lines) + ("\n" if lines else "")
