#!/usr/bin/env python3
"""Build the bundled reference stranding dataset.

The public source file is not redistributable, so the package ships a
deterministic reconstruction that reproduces every published marginal of
the 2023 first-semester dataset: per-region totals, visit counts and
per-visit means; per-group tally statistics; per-species totals; the ten
largest region x species cells; and the monthly growth profile (harmonic
mean ratio ~1.64 with the largest jump from February to March).

Every constraint is re-verified here from the raw rows (independently of
the package parser) before the CSV is written.  Run from the repo root:

    python tools/build_reference_data.py
"""

from __future__ import annotations

import csv
import math
from datetime import date, timedelta
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "carcasswatch" / "data"

SEED = 20230102

# ---------------------------------------------------------------- targets

REGION_TOTALS = {
    2: 5494, 15: 4603, 3: 2014, 1: 1887, 4: 1460, 8: 580, 16: 425,
    9: 318, 6: 279, 7: 192, 10: 164, 5: 159, 14: 62, 11: 29, 12: 25,
}
# field visits per region; totals/visits reproduce the published per-visit
# weekly means (6.04, 13.5, 3.69, 1.04, ...) at their printed precision
REGION_VISITS = {
    2: 910, 15: 341, 3: 546, 1: 1814, 4: 1206, 8: 291, 16: 102,
    9: 28, 6: 102, 7: 125, 10: 135, 5: 144, 14: 49, 11: 23, 12: 25,
}
REGION_MEANS = {
    2: 6.04, 15: 13.5, 3: 3.69, 1: 1.04, 4: 1.21, 8: 1.99, 16: 4.17,
    9: 11.4, 6: 2.74, 7: 1.54, 10: 1.21, 5: 1.10, 14: 1.27, 11: 1.26, 12: 1.0,
}

SPECIES = [
    ("Lobo Marino Común, Lobo de Un Pelo - Otaria flavescens", "PI", 14840),
    ("Pingüino de Humboldt - Spheniscus humboldti", "BI", 2224),
    ("Pingüino de Magallanes - Spheniscus magellanicus", "BI", 421),
    ("Chungungo - Lontra felina", "MU", 34),
    ("Lobo Fino de Juan Fernández - Arctocephalus philippii", "PI", 24),
    ("Marsopa Espinosa - Phocoena spinipinnis", "CE", 22),
    ("Tortuga Verde - Chelonia mydas", "QU", 20),
    ("Delfín Chileno - Cephalorhynchus eutropia", "CE", 16),
    ("Ballena Sei, Rorcual Bacalao, Rorcual de Rudolphi - Balaenoptera borealis", "CE", 15),
    ("Elefante Marino - Mirounga leonina", "PI", 12),
    ("Lobo Fino Austral - Arctocephalus australis", "PI", 10),
    ("Delfín Naríz de Botella - Tursiops truncatus", "CE", 9),
    ("Delfín Oscuro - Lagenorhynchus obscurus", "CE", 8),
    ("Undefined", "UND", 8),
    ("Ballena Jorobada - Megaptera novaeangliae", "CE", 4),
    ("Delfín Común - Delphinus delphis", "CE", 4),
    ("Tortuga Olivácea - Lepidochelys olivacea", "QU", 4),
    ("Cachalote - Physeter macrocephalus", "CE", 2),
    ("Delfin Gris - Grampus griseus", "CE", 2),
    ("Orca - Orcinus orca", "CE", 2),
    ("Ballena de Aleta, Rorcual Común, Fin - Balaenoptera physalus", "CE", 1),
    ("Ballena Franca Austral - Eubalaena australis", "CE", 1),
    ("Ballena Picuda de Cuvier - Ziphius cavirostris", "CE", 1),
    ("Cachalote Enano de Cabeza Corta, Cachalote Pigmeo - Kogia breviceps", "CE", 1),
    ("Delfín Austral - Lagenorhynchus australis", "CE", 1),
    ("Delfín de Diente Áspero - Steno bredanensis", "CE", 1),
    ("Foca Leopardo - Hydrurga leptonyx", "PI", 1),
    ("Huillín - Lontra provocax", "MU", 1),
    ("Pingüino Rey - Aptenodytes patagonicus", "BI", 1),
    ("Zifio de Arnoux - Berardius arnuxii", "CE", 1),
]
GROUP_OF = {name: group for name, group, _ in SPECIES}

OTARIA = SPECIES[0][0]
HUMBOLDTI = SPECIES[1][0]
SPINIPINNIS = "Marsopa Espinosa - Phocoena spinipinnis"
OLIVACEA = "Tortuga Olivácea - Lepidochelys olivacea"
UNDEFINED = "Undefined"
EUTROPIA = "Delfín Chileno - Cephalorhynchus eutropia"
BOREALIS = "Ballena Sei, Rorcual Bacalao, Rorcual de Rudolphi - Balaenoptera borealis"

# the ten largest region x species cells, in rank order
TOP10 = [
    (2, OTARIA, 5234),
    (15, OTARIA, 3617),
    (1, OTARIA, 1811),
    (3, OTARIA, 1572),
    (4, OTARIA, 944),
    (15, HUMBOLDTI, 943),
    (8, OTARIA, 541),
    (4, HUMBOLDTI, 485),
    (3, HUMBOLDTI, 430),
    (16, OTARIA, 411),
]
UNPINNED_CELL_CAP = 410  # keeps every remaining cell strictly below rank 10

GROUP_TOTALS = {"PI": 14887, "BI": 2646, "CE": 91, "MU": 35, "QU": 24, "UND": 8}
GROUP_VISITS = {"PI": 4790, "BI": 900, "CE": 88, "MU": 35, "QU": 21, "UND": 7}
GROUP_MAX_TALLY = {"PI": 175, "BI": 105, "CE": 4, "MU": 1, "QU": 4, "UND": 2}
GROUP_MEANS = {"PI": 3, "BI": 3, "CE": 1, "MU": 1, "QU": 1, "UND": 1}

# animals per month (weeks grouped by the month of their Thursday); the
# harmonic mean of the five successive ratios is 1.6394 and the largest
# single jump is February -> March
MONTH_TOTALS = [352, 475, 2138, 3527, 4762, 6437]
MONTH_WEEKS = [range(1, 5), range(5, 9), range(9, 14), range(14, 18),
               range(18, 22), range(22, 27)]

# coastal bounding boxes per region (lat_min, lat_max, lon_min, lon_max)
REGION_BOX = {
    15: (-18.6, -18.3, -70.40, -70.20),
    1: (-21.4, -19.5, -70.20, -69.90),
    2: (-25.4, -21.9, -70.60, -70.20),
    3: (-29.2, -25.8, -71.50, -70.40),
    4: (-32.2, -29.2, -71.70, -71.20),
    5: (-33.5, -32.2, -71.70, -71.40),
    6: (-34.5, -33.8, -72.00, -71.80),
    7: (-36.0, -34.8, -72.70, -72.00),
    16: (-36.7, -36.0, -72.90, -72.40),
    8: (-38.2, -36.7, -73.70, -73.00),
    9: (-39.4, -38.2, -73.50, -73.10),
    14: (-40.2, -39.4, -73.70, -73.20),
    10: (-43.7, -40.2, -74.00, -72.90),
    11: (-47.8, -43.7, -75.50, -72.80),
    12: (-55.8, -47.8, -75.00, -67.00),
}
REGION_CITY = {
    15: "Arica", 1: "Iquique", 2: "Antofagasta", 3: "Caldera", 4: "Coquimbo",
    5: "Valparaíso", 6: "Pichilemu", 7: "Constitución", 16: "Cobquecura",
    8: "Talcahuano", 9: "Puerto Saavedra", 14: "Valdivia", 10: "Puerto Montt",
    11: "Puerto Aysén", 12: "Punta Arenas",
}

HEADER = [
    "REGION", "RECORD (n)", "LAT", "LON", "Sample TIME", "SPECIES Type",
    "SPECIES", "INSTITUTIONS ENROLLED", "GENDER", "MARKS",
    "REHABILITATION CENTER", "AGE", "CITY", "VITAL CONDITION", "SIZE",
    "H5N1 SAMPLED", "LOCATION INFO", "STARTING DAY", "ENDING DAY",
    "CORPORAL CONDITION",
]


# ------------------------------------------------------- cell allocation

def allocate_cells() -> dict[tuple[int, str], int]:
    """Region x species animal matrix with exact marginals.

    The ten published largest cells are pinned; a handful of cells are
    reserved so each group's maximum tally has a feasible home (e.g. the
    Chelonian 4-animal visit cannot sit in region 12, whose visit count
    equals its animal count).  The rest is a greedy transportation fill,
    capped below the 10th-ranked cell.
    """
    cells: dict[tuple[int, str], int] = {}
    reserved = {
        (11, SPINIPINNIS): 22,  # hosts the one multi-animal Cetacean visit
        (11, OLIVACEA): 4,      # the single 4-turtle visit
        (2, UNDEFINED): 2,      # the single 2-animal Undefined visit
        # cetaceans strand along the whole coast; anchoring some in the
        # northern regions keeps the group's regional profile realistic
        (1, EUTROPIA): 6,
        (1, BOREALIS): 4,
    }
    for region, name, animals in TOP10:
        cells[(region, name)] = animals
    cells.update(reserved)

    region_rem = dict(REGION_TOTALS)
    species_rem = {name: total for name, _, total in SPECIES}
    for (region, name), animals in cells.items():
        region_rem[region] -= animals
        species_rem[name] -= animals
    assert all(v >= 0 for v in region_rem.values())
    assert all(v >= 0 for v in species_rem.values())

    for name, _, _ in sorted(SPECIES, key=lambda s: (-species_rem[s[0]], s[0])):
        rem = species_rem[name]
        while rem > 0:
            open_regions = [
                r for r in REGION_TOTALS
                if region_rem[r] > 0 and (r, name) not in cells
            ]
            assert open_regions, f"no capacity left for {name}"
            r = min(open_regions, key=lambda r: (-region_rem[r], r))
            take = min(rem, region_rem[r], UNPINNED_CELL_CAP)
            cells[(r, name)] = take
            region_rem[r] -= take
            rem -= take
        species_rem[name] = 0
    assert all(v == 0 for v in region_rem.values())

    for (region, name), animals in cells.items():
        if (region, name, animals) not in TOP10:
            assert animals <= UNPINNED_CELL_CAP, (region, name, animals)
    return cells


# ------------------------------------------------------- visit splitting

def other_group_visits(cells) -> dict[tuple[int, str], list[int]]:
    """Tally lists for CE/MU/QU/UND cells: all single-animal visits except
    one designated multi-animal visit per group (none for Mustelids)."""
    out = {}
    for (region, name), animals in cells.items():
        group = GROUP_OF[name]
        if group in ("PI", "BI"):
            continue
        if (region, name) == (11, SPINIPINNIS):
            out[(region, name)] = [4] + [1] * (animals - 4)
        elif (region, name) == (11, OLIVACEA):
            out[(region, name)] = [4]
        elif (region, name) == (2, UNDEFINED):
            out[(region, name)] = [2] + [1] * (animals - 2)
        else:
            out[(region, name)] = [1] * animals
    return out


def split_tallies(animals: int, visits: int, max_tally: int,
                  force_max: bool = False) -> list[int]:
    """Decompose `animals` into `visits` positive tallies <= max_tally."""
    assert visits <= animals <= visits * max_tally, (animals, visits)
    if force_max:
        rest = split_tallies(animals - max_tally, visits - 1, max_tally)
        return [max_tally] + rest
    parts = [1] * visits
    excess = animals - visits
    i = 0
    while excess > 0:
        add = min(max_tally - 1, excess)
        parts[i] += add
        excess -= add
        i += 1
    return sorted(parts, reverse=True)


def solve_pi_bi_visits(cells, other_tallies):
    """Per-region visit counts for Pinnipeds and Birds.

    Region budgets are the published visit counts minus the other groups'
    visits; a feasible-flow pass hits the group totals exactly within the
    per-cell bounds [ceil(animals/max_tally), animals]."""
    def region_bounds(r, group):
        # minimum visits = sum of per-cell ceilings; maximum = all tallies 1
        lo = hi = 0
        for (rr, name), animals in cells.items():
            if rr == r and GROUP_OF[name] == group:
                lo += math.ceil(animals / GROUP_MAX_TALLY[group])
                hi += animals
        return lo, hi

    budget = {}
    for r in REGION_TOTALS:
        used = sum(
            len(t) for (rr, name), t in other_tallies.items() if rr == r
        )
        budget[r] = REGION_VISITS[r] - used
        assert budget[r] >= 0, r

    pi_v, bi_v = {}, {}
    for r in sorted(REGION_TOTALS):
        lo_p, hi_p = region_bounds(r, "PI")
        lo_b, hi_b = region_bounds(r, "BI")
        assert lo_p + lo_b <= budget[r] <= hi_p + hi_b, r
        v = min(hi_p, max(lo_p, budget[r] - hi_b))
        pi_v[r] = v
        bi_v[r] = budget[r] - v
        assert lo_b <= bi_v[r] <= hi_b, r

    deficit = GROUP_VISITS["PI"] - sum(pi_v.values())
    assert deficit >= 0, "initial PI visits overshoot the group total"
    for r in sorted(REGION_TOTALS, key=lambda r: (-region_bounds(r, "PI")[1], r)):
        if deficit == 0:
            break
        lo_b = region_bounds(r, "BI")[0]
        hi_p = region_bounds(r, "PI")[1]
        room = min(hi_p - pi_v[r], bi_v[r] - lo_b)
        move = min(room, deficit)
        pi_v[r] += move
        bi_v[r] -= move
        deficit -= move
    assert deficit == 0
    assert sum(bi_v.values()) == GROUP_VISITS["BI"]
    return pi_v, bi_v


def build_visits(cells):
    """Full visit list: (region, species, group, tally)."""
    other = other_group_visits(cells)
    pi_v, bi_v = solve_pi_bi_visits(cells, other)

    visits = []
    for (region, name), tallies in sorted(other.items()):
        for t in tallies:
            visits.append((region, name, GROUP_OF[name], t))

    for group, group_v in (("PI", pi_v), ("BI", bi_v)):
        max_tally = GROUP_MAX_TALLY[group]
        for r in sorted(REGION_TOTALS):
            members = sorted(
                (name, a) for (rr, name), a in cells.items()
                if rr == r and GROUP_OF[name] == group
            )
            need = group_v[r]
            if not members:
                assert need == 0
                continue
            # distribute the region's group visits over its species cells,
            # biggest cells first, respecting per-cell bounds
            lo = [math.ceil(a / max_tally) for _, a in members]
            hi = [a for _, a in members]
            v = list(lo)
            rest = need - sum(lo)
            assert rest >= 0, (r, group)
            for i in sorted(range(len(members)), key=lambda i: -hi[i]):
                add = min(hi[i] - v[i], rest)
                v[i] += add
                rest -= add
            assert rest == 0, (r, group)
            for (name, a), k in zip(members, v):
                force = (r, name) == (15, OTARIA) or (r, name) == (15, HUMBOLDTI)
                for t in split_tallies(a, k, max_tally, force_max=force):
                    visits.append((r, name, group, t))
    return visits


# ----------------------------------------------------------- scheduling

def assign_months(visits, rng):
    """Month slot (1..6) per visit, with exact monthly animal totals.

    Multi-animal visits are placed first following per-region month
    preferences (the Arica mass-mortality pulse sits in March-May), then
    single-animal visits fill every month to its exact target.
    """
    prefs = {
        15: (4, 3, 5, 6, 2, 1),
        2: (3, 4, 5, 6, 2, 1),
        3: (5, 6, 4, 3, 2, 1),
    }
    default_pref = (6, 5, 4, 3, 2, 1)
    remaining = {m + 1: MONTH_TOTALS[m] for m in range(6)}

    months = [0] * len(visits)
    heavy = sorted(
        (i for i, v in enumerate(visits) if v[3] > 1),
        key=lambda i: (-visits[i][3], visits[i][0], visits[i][1]),
    )
    for i in heavy:
        region, _, _, tally = visits[i]
        for m in prefs.get(region, default_pref):
            if remaining[m] >= tally:
                months[i] = m
                remaining[m] -= tally
                break
        else:
            raise AssertionError(f"no month fits tally {tally}")

    ones = [i for i, v in enumerate(visits) if v[3] == 1]
    assert sum(remaining.values()) == len(ones)
    order = rng.permutation(len(ones))
    cursor = 0
    for m in range(1, 7):
        for _ in range(remaining[m]):
            months[ones[order[cursor]]] = m
            cursor += 1
    assert cursor == len(ones)
    return months


def week_and_date(month, rng):
    """Uniform week inside the month's week span, uniform day in the week."""
    weeks = list(MONTH_WEEKS[month - 1])
    week = weeks[rng.integers(len(weeks))]
    monday = date(2023, 1, 2) + timedelta(weeks=week - 1)
    day = monday + timedelta(days=int(rng.integers(7)))
    return week, min(max(day, date(2023, 1, 2)), date(2023, 6, 30))


# ------------------------------------------------------------- the rows

def build_rows():
    rng = np.random.default_rng(SEED)
    cells = allocate_cells()
    visits = build_visits(cells)
    months = assign_months(visits, rng)

    rows = []
    for (region, name, group, tally), month in zip(visits, months):
        week, day = week_and_date(month, rng)
        lat_lo, lat_hi, lon_lo, lon_hi = REGION_BOX[region]
        lat = round(float(rng.uniform(lat_lo, lat_hi)), 4)
        lon = round(float(rng.uniform(lon_lo, lon_hi)), 4)

        u = rng.random()
        gender = "Macho" if u < 0.30 else ("Hembra" if u < 0.55 else "")
        u = rng.random()
        age = "Adulto" if u < 0.35 else ("Juvenil" if u < 0.55 else "")
        if region == 16:
            vital = "Vivo"  # strandings there were returned to the sea
        else:
            u = rng.random()
            vital = "Muerto" if u < 0.93 else ("Vivo" if u < 0.98 else "")
        sampled = "SI" if (region in (15, 2, 3, 4, 1) and rng.random() < 0.04) else "NO"
        record_n = "" if (tally == 1 and rng.random() < 0.10) else str(tally)
        institutions = "SERNAPESCA" if rng.random() < 0.9 else "SERNAPESCA;CONAF"

        rows.append([
            str(region), record_n, f"{lat:.4f}", f"{lon:.4f}",
            day.isoformat(), group, name, institutions, gender, "",
            "", age, REGION_CITY[region], vital, "",
            sampled, "costa", day.isoformat(),
            (day + timedelta(days=1)).isoformat(), "",
        ])
    rows.sort(key=lambda r: (r[4], int(r[0]), r[6], r[1]))
    return rows


# ---------------------------------------------------------- verification

def thursday_month(day: date) -> int:
    iso = day.isocalendar()
    return date.fromisocalendar(iso[0], iso[1], 4).month


def verify(rows):
    """Recompute every published figure from the raw rows."""
    region_total = {r: 0 for r in REGION_TOTALS}
    region_visits = {r: 0 for r in REGION_TOTALS}
    group_tallies: dict[str, list[int]] = {g: [] for g in GROUP_TOTALS}
    species_total: dict[str, int] = {}
    cell_total: dict[tuple[int, str], int] = {}
    month_total = {m: 0 for m in range(1, 7)}

    for row in rows:
        region = int(row[0])
        tally = int(row[1]) if row[1] else 1
        day = date.fromisoformat(row[4])
        group, name = row[5], row[6]
        assert date(2023, 1, 2) <= day <= date(2023, 6, 30), row
        assert GROUP_OF[name] == group

        region_total[region] += tally
        region_visits[region] += 1
        group_tallies[group].append(tally)
        species_total[name] = species_total.get(name, 0) + tally
        cell_total[(region, name)] = cell_total.get((region, name), 0) + tally
        month_total[thursday_month(day)] += tally

    assert sum(region_total.values()) == 17691
    assert len(rows) == 5841
    assert region_total == REGION_TOTALS
    assert region_visits == REGION_VISITS
    for r, printed in REGION_MEANS.items():
        mean = region_total[r] / region_visits[r]
        decimals = len(str(printed).split(".")[1]) if "." in str(printed) else 0
        assert abs(mean - printed) < 0.5 * 10 ** (-decimals), (r, mean, printed)

    for g, expect_total in GROUP_TOTALS.items():
        t = np.array(group_tallies[g])
        assert t.sum() == expect_total, g
        assert len(t) == GROUP_VISITS[g], (g, len(t))
        assert t.min() == 1 and t.max() == GROUP_MAX_TALLY[g], g
        q1, med, q3 = np.percentile(t, [25, 50, 75])
        assert q1 == med == q3 == 1.0, g
        assert round(t.mean()) == GROUP_MEANS[g], (g, t.mean())

    for name, _, total in SPECIES:
        assert species_total[name] == total, name

    ranked = sorted(cell_total.items(), key=lambda kv: (-kv[1], kv[0]))
    top = [(r, name, total) for (r, name), total in ranked[:10]]
    assert top == TOP10, top
    assert ranked[10][1] <= UNPINNED_CELL_CAP

    assert [month_total[m] for m in range(1, 7)] == MONTH_TOTALS
    ratios = [MONTH_TOTALS[i + 1] / MONTH_TOTALS[i] for i in range(5)]
    harmonic = len(ratios) / sum(1 / r for r in ratios)
    assert abs(harmonic - 1.64) < 0.01, harmonic
    assert max(range(5), key=lambda i: ratios[i]) == 1  # Feb -> Mar

    print(f"rows: {len(rows)}  animals: {sum(region_total.values())}")
    print(f"harmonic monthly ratio: {harmonic:.4f}")


# ------------------------------------------------------------ toy panel

def build_toy_rows():
    """Small three-region dataset for fast fitting and service demos."""
    rng = np.random.default_rng(7)
    rows = []
    base = {("15", "PI"): 9.0, ("15", "BI"): 3.0, ("2", "PI"): 6.0,
            ("2", "BI"): 1.5, ("1", "PI"): 2.0, ("1", "CE"): 0.6}
    names = {"PI": OTARIA, "BI": HUMBOLDTI, "CE": SPINIPINNIS}
    for week in range(1, 27):
        ramp = 0.5 + 1.5 * week / 26
        for (region, group), rate in base.items():
            n = rng.poisson(rate * ramp)
            if n == 0:
                continue
            lat_lo, lat_hi, lon_lo, lon_hi = REGION_BOX[int(region)]
            monday = date(2023, 1, 2) + timedelta(weeks=week - 1)
            for _ in range(min(n, 4)):
                day = monday + timedelta(days=int(rng.integers(5)))
                rows.append([
                    region, str(max(1, n // min(n, 4))),
                    f"{rng.uniform(lat_lo, lat_hi):.4f}",
                    f"{rng.uniform(lon_lo, lon_hi):.4f}",
                    day.isoformat(), group, names[group], "SERNAPESCA",
                    "", "", "", "", REGION_CITY[int(region)], "Muerto", "",
                    "NO", "costa", day.isoformat(), day.isoformat(), "",
                ])
    return rows


def main():
    rows = build_rows()
    verify(rows)
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "strandings_2023s1.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerows(rows)
    toy = build_toy_rows()
    with open(OUT / "strandings_toy.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerows(toy)
    print(f"wrote {OUT / 'strandings_2023s1.csv'} ({len(rows)} rows)")
    print(f"wrote {OUT / 'strandings_toy.csv'} ({len(toy)} rows)")


if __name__ == "__main__":
    main()
