/** Pure HTML/SVG renderers.
 *
 * Every function here maps (state, payload) to a string with no DOM or
 * network access, so the views can be tested as plain string transforms.
 * Each numeric cell carries the raw API value in a data-value attribute;
 * the visible text may be rounded for display, the attribute never is.
 */

import { chartLink, serializeState } from "./state.js";
import type { FilterState, Lang, View } from "./state.js";
import { flagLabel, groupLabel, t } from "./labels.js";
import type {
  AlertRow,
  ChartPayload,
  FieldPayload,
  GroupRow,
  MeshPayload,
  RegionRow,
  SeriesPayload,
  SpeciesRow,
  Vocab,
} from "./types.js";

export interface OverviewData {
  vocab: Vocab;
  series: SeriesPayload;
  regions: RegionRow[];
  groups: GroupRow[];
  species: SpeciesRow[];
  field: FieldPayload | null;
  mesh: MeshPayload | null;
}

export interface ChartData {
  vocab: Vocab;
  chart: ChartPayload | null;
}

export interface AlertData {
  vocab: Vocab;
  alerts: AlertRow[];
}

const EARTH_RADIUS_KM = 6371.0;
const ABOVE = "above-band";
const BELOW = "below-band";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Display rounding only; data-value attributes keep the exact figure. */
export function fmt(value: number | null): string {
  if (value === null) return "–";
  if (Number.isInteger(value)) return String(value);
  if (Math.abs(value) >= 100) return value.toFixed(1);
  return value.toFixed(2);
}

function cell(value: number | null, extra = ""): string {
  if (value === null) return `<td class="num"${extra}>–</td>`;
  return `<td class="num" data-value="${String(value)}"${extra}>${fmt(value)}</td>`;
}

function option(value: string, label: string, selected: boolean): string {
  const sel = selected ? " selected" : "";
  return `<option value="${esc(value)}"${sel}>${esc(label)}</option>`;
}

// ---------------------------------------------------------------------------
// shell

export function renderShell(state: FilterState, inner: string): string {
  const lang = state.lang;
  const tabs: Array<[View, string]> = [
    ["overview", t(lang, "overview")],
    ["chart", t(lang, "controlChart")],
    ["alerts", t(lang, "alerts")],
  ];
  const nav = tabs
    .map(([view, label]) => {
      const href = serializeState({ ...state, view }) || "?";
      const cls = state.view === view ? ' class="active"' : "";
      return `<a${cls} data-view="${view}" href="${esc(href)}">${esc(label)}</a>`;
    })
    .join("");
  const other: Lang = lang === "en" ? "es" : "en";
  const langHref = serializeState({ ...state, lang: other }) || "?";
  return [
    `<header>`,
    `<h1>${esc(t(lang, "title"))}</h1>`,
    `<nav>${nav}</nav>`,
    `<a id="lang-toggle" data-lang="${other}" href="${esc(langHref)}">${esc(
      t(lang, "language"),
    )}</a>`,
    `</header>`,
    `<main>${inner}</main>`,
  ].join("");
}

export function renderError(lang: Lang, message: string): string {
  return `<div class="error"><strong>${esc(t(lang, "apiError"))}</strong> ${esc(
    message,
  )}</div>`;
}

// ---------------------------------------------------------------------------
// filters

function regionSelect(state: FilterState, vocab: Vocab, allowAll: boolean): string {
  const opts = [
    allowAll ? option("", t(state.lang, "allRegions"), state.region === null) : "",
    ...vocab.regions.map((r) =>
      option(String(r), `${t(state.lang, "region")} ${r}`, state.region === r),
    ),
  ].join("");
  return `<label>${esc(t(state.lang, "region"))} <select id="region-select">${opts}</select></label>`;
}

function groupSelect(state: FilterState, vocab: Vocab, allowAll: boolean): string {
  const opts = [
    allowAll ? option("", t(state.lang, "allGroups"), state.group === null) : "",
    ...vocab.groups.map((g) =>
      option(g, groupLabel(state.lang, g), state.group === g),
    ),
  ].join("");
  return `<label>${esc(t(state.lang, "speciesGroup"))} <select id="group-select">${opts}</select></label>`;
}

function levelSelect(state: FilterState): string {
  const levels = [0.5, 0.8, 0.95];
  if (!levels.includes(state.level)) levels.push(state.level);
  const opts = levels
    .sort((a, b) => a - b)
    .map((v) => option(String(v), `${Math.round(v * 100)}%`, state.level === v))
    .join("");
  return `<label>${esc(t(state.lang, "level"))} <select id="level-select">${opts}</select></label>`;
}

function strataSelects(state: FilterState, vocab: Vocab): string {
  const any = t(state.lang, "any");
  const ages = [
    option("", any, state.age === null),
    ...vocab.ages.map((a) => option(a, a, state.age === a)),
  ].join("");
  const genders = [
    option("", any, state.gender === null),
    ...vocab.genders.map((g) => option(g, g, state.gender === g)),
  ].join("");
  return (
    `<label>${esc(t(state.lang, "age"))} <select id="age-select">${ages}</select></label>` +
    `<label>${esc(t(state.lang, "gender"))} <select id="gender-select">${genders}</select></label>`
  );
}

// ---------------------------------------------------------------------------
// overview

function seriesSvg(series: SeriesPayload): string {
  const weeks = series.weeks;
  const values = series.cumulative;
  const n = weeks.length;
  if (n === 0) return `<svg class="series" viewBox="0 0 720 200"></svg>`;
  const W = 720;
  const H = 200;
  const padL = 52;
  const padR = 12;
  const padT = 10;
  const padB = 24;
  const ymax = Math.max(1, ...values);
  const x = (i: number) =>
    n === 1 ? (padL + W - padR) / 2 : padL + (i * (W - padL - padR)) / (n - 1);
  const y = (v: number) => H - padB - (v / ymax) * (H - padT - padB);
  const pts = values.map((v, i) => `${x(i).toFixed(1)},${y(v).toFixed(1)}`).join(" ");
  const last = values[n - 1] ?? 0;
  return [
    `<svg class="series" viewBox="0 0 ${W} ${H}" role="img">`,
    `<polyline class="cumulative" fill="none" points="${pts}"/>`,
    `<text class="axis" x="${padL - 6}" y="${y(ymax) + 4}" text-anchor="end">${fmt(ymax)}</text>`,
    `<text class="axis" x="${padL - 6}" y="${H - padB + 4}" text-anchor="end">0</text>`,
    `<text class="total" data-value="${String(last)}" x="${W - padR}" y="${y(last) - 6}" text-anchor="end">${fmt(last)}</text>`,
    `</svg>`,
  ].join("");
}

function regionTable(state: FilterState, rows: RegionRow[]): string {
  const lang = state.lang;
  const head =
    `<tr><th>${esc(t(lang, "region"))}</th>` +
    `<th>${esc(t(lang, "total"))}</th>` +
    `<th>${esc(t(lang, "weeklyMean"))}</th>` +
    `<th>${esc(t(lang, "max"))}</th>` +
    `<th>${esc(t(lang, "visits"))}</th></tr>`;
  const body = rows
    .map((row) => {
      const href = serializeState({ ...state, region: row.region }) || "?";
      return (
        `<tr data-region="${row.region}">` +
        `<td><a href="${esc(href)}">${row.region}</a></td>` +
        cell(row.total) +
        cell(row.weekly_mean) +
        cell(row.max) +
        cell(row.n_visits) +
        `</tr>`
      );
    })
    .join("");
  return `<table class="ranking" id="region-ranking"><thead>${head}</thead><tbody>${body}</tbody></table>`;
}

function groupTable(state: FilterState, rows: GroupRow[]): string {
  const lang = state.lang;
  const head =
    `<tr><th>${esc(t(lang, "speciesGroup"))}</th>` +
    `<th>${esc(t(lang, "total"))}</th>` +
    `<th class="num">min</th><th class="num">med</th>` +
    `<th class="num">${esc(t(lang, "weeklyMean"))}</th>` +
    `<th class="num">${esc(t(lang, "max"))}</th></tr>`;
  const body = rows
    .map((row) => {
      const href = chartLink(state, state.region ?? 0, row.species_group);
      const label = groupLabel(lang, row.species_group);
      const nameCell =
        state.region === null
          ? esc(label)
          : `<a href="${esc(href)}">${esc(label)}</a>`;
      return (
        `<tr data-group="${esc(row.species_group)}">` +
        `<td>${nameCell}</td>` +
        cell(row.total) +
        cell(row.min) +
        cell(row.median) +
        cell(row.mean) +
        cell(row.max) +
        `</tr>`
      );
    })
    .join("");
  return `<table class="ranking" id="group-ranking"><thead>${head}</thead><tbody>${body}</tbody></table>`;
}

function speciesTable(lang: Lang, rows: SpeciesRow[], limit = 10): string {
  const head = `<tr><th>#</th><th>${esc(t(lang, "speciesRanking"))}</th><th>${esc(
    t(lang, "total"),
  )}</th></tr>`;
  const body = rows
    .slice(0, limit)
    .map(
      (row, i) =>
        `<tr><td>${i + 1}</td><td><em>${esc(row.species_name)}</em></td>` +
        cell(row.total) +
        `</tr>`,
    )
    .join("");
  return `<table class="ranking" id="species-ranking"><thead>${head}</thead><tbody>${body}</tbody></table>`;
}

/** White-to-red ramp for the posterior surface; v in [0, 1]. */
export function heatColor(v: number): string {
  const clamped = Math.max(0, Math.min(1, v));
  const g = Math.round(255 - clamped * 200);
  const b = Math.round(255 - clamped * 215);
  return `rgb(255,${g},${b})`;
}

function meshHull(mesh: MeshPayload): Array<[number, number]> {
  // Boundary = edges used by exactly one triangle, chained into a loop.
  const count = new Map<string, [number, number]>();
  const seen = new Map<string, number>();
  for (const tri of mesh.triangles) {
    const pairs: Array<[number, number]> = [
      [tri[0], tri[1]],
      [tri[1], tri[2]],
      [tri[2], tri[0]],
    ];
    for (const [a, b] of pairs) {
      const key = a < b ? `${a}-${b}` : `${b}-${a}`;
      seen.set(key, (seen.get(key) ?? 0) + 1);
      count.set(key, [a, b]);
    }
  }
  const next = new Map<number, number>();
  for (const [key, [a, b]] of count) {
    if (seen.get(key) === 1) next.set(a, b);
  }
  const loop: Array<[number, number]> = [];
  const start = next.keys().next();
  if (start.done) return loop;
  let vertex = start.value;
  for (let i = 0; i <= next.size; i += 1) {
    const xy = mesh.vertices[vertex];
    if (!xy) break;
    loop.push(xy);
    const following = next.get(vertex);
    if (following === undefined) break;
    vertex = following;
    if (vertex === start.value) break;
  }
  return loop;
}

function unproject(
  xy: [number, number],
  origin: [number, number],
): [number, number] {
  const [lon0, lat0] = origin;
  const lon =
    lon0 +
    ((xy[0] / (EARTH_RADIUS_KM * Math.cos((lat0 * Math.PI) / 180))) * 180) /
      Math.PI;
  const lat = lat0 + ((xy[1] / EARTH_RADIUS_KM) * 180) / Math.PI;
  return [lon, lat];
}

export function renderFieldMap(
  lang: Lang,
  field: FieldPayload,
  mesh: MeshPayload | null,
): string {
  const lons = field.lon;
  const lats = field.lat;
  if (lons.length === 0 || lats.length === 0) {
    return `<svg class="field" viewBox="0 0 10 10"></svg>`;
  }
  const res = field.resolution_deg;
  const lonMin = lons[0] ?? 0;
  const latMin = lats[0] ?? 0;
  const W = (lons.length + 1) * 10;
  const H = (lats.length + 1) * 10;
  const px = (lon: number) => ((lon - lonMin) / res) * 10 + 5;
  // Latitude increases upward; SVG y increases downward.
  const py = (lat: number) => H - 5 - ((lat - latMin) / res) * 10;
  let vmin = Infinity;
  let vmax = -Infinity;
  for (const row of field.values) {
    for (const v of row) {
      if (v === null) continue;
      vmin = Math.min(vmin, v);
      vmax = Math.max(vmax, v);
    }
  }
  if (!Number.isFinite(vmin)) {
    vmin = 0;
    vmax = 1;
  }
  const span = vmax - vmin || 1;
  const cells: string[] = [];
  field.values.forEach((row, li) => {
    row.forEach((v, lj) => {
      if (v === null) return;
      const lon = lons[lj];
      const lat = lats[li];
      if (lon === undefined || lat === undefined) return;
      cells.push(
        `<rect data-lon="${String(lon)}" data-lat="${String(lat)}" ` +
          `data-value="${String(v)}" x="${(px(lon) - 5).toFixed(1)}" ` +
          `y="${(py(lat) - 5).toFixed(1)}" width="10" height="10" ` +
          `fill="${heatColor((v - vmin) / span)}"/>`,
      );
    });
  });
  let hull = "";
  if (mesh !== null) {
    const loop = meshHull(mesh);
    if (loop.length > 2) {
      const pts = loop
        .map((xy) => unproject(xy, mesh.origin))
        .map(([lon, lat]) => `${px(lon).toFixed(1)},${py(lat).toFixed(1)}`)
        .join(" ");
      hull = `<polygon class="hull" fill="none" points="${pts}"/>`;
    }
  }
  const legend =
    `<div class="legend">` +
    `<span>${esc(t(lang, "low"))}</span>` +
    `<span class="swatch" style="background:${heatColor(0)}"></span>` +
    `<span class="swatch" style="background:${heatColor(0.5)}"></span>` +
    `<span class="swatch" style="background:${heatColor(1)}"></span>` +
    `<span>${esc(t(lang, "high"))}</span>` +
    `<span class="bounds" data-min="${String(vmin)}" data-max="${String(vmax)}">` +
    `${fmt(vmin)} .. ${fmt(vmax)}</span></div>`;
  return (
    `<figure class="map">` +
    `<svg class="field" viewBox="0 0 ${W} ${H}" role="img">${cells.join("")}${hull}</svg>` +
    legend +
    `</figure>`
  );
}

function monthSelect(state: FilterState, months: number): string {
  const opts = [];
  for (let m = 1; m <= months; m += 1) {
    opts.push(option(String(m), String(m), state.month === m));
  }
  return `<label>${esc(t(state.lang, "month"))} <select id="month-select">${opts.join("")}</select></label>`;
}

export function renderOverview(state: FilterState, data: OverviewData): string {
  const lang = state.lang;
  const filters =
    `<div class="filters">` +
    regionSelect(state, data.vocab, true) +
    groupSelect(state, data.vocab, true) +
    strataSelects(state, data.vocab) +
    `</div>`;
  const totalBadge =
    `<p class="headline">${esc(t(lang, "total"))}: ` +
    `<strong id="series-total" data-value="${String(data.series.total)}">` +
    `${fmt(data.series.total)}</strong></p>`;
  const map =
    data.field === null
      ? ""
      : `<section class="panel"><h2>${esc(t(lang, "map"))}</h2>` +
        monthSelect(state, 6) +
        renderFieldMap(lang, data.field, data.mesh) +
        `</section>`;
  return [
    filters,
    `<section class="panel"><h2>${esc(t(lang, "cumulative"))}</h2>`,
    totalBadge,
    seriesSvg(data.series),
    `</section>`,
    `<section class="panel"><h2>${esc(t(lang, "ranking"))}</h2>`,
    regionTable(state, data.regions),
    groupTable(state, data.groups),
    `</section>`,
    `<section class="panel"><h2>${esc(t(lang, "speciesRanking"))}</h2>`,
    speciesTable(lang, data.species),
    `</section>`,
    map,
  ].join("");
}

// ---------------------------------------------------------------------------
// control chart

function chartSvg(chart: ChartPayload): string {
  const n = chart.weeks.length;
  const W = 760;
  const H = 300;
  const padL = 52;
  const padR = 12;
  const padT = 12;
  const padB = 28;
  const finite = (xs: Array<number | null>) =>
    xs.filter((v): v is number => v !== null && Number.isFinite(v));
  const ymax =
    Math.max(1e-9, ...finite(chart.upper), ...finite(chart.observed)) * 1.08;
  const x = (i: number) =>
    n <= 1 ? (padL + W - padR) / 2 : padL + (i * (W - padL - padR)) / (n - 1);
  const y = (v: number) => H - padB - (v / ymax) * (H - padT - padB);
  const point = (i: number, v: number) => `${x(i).toFixed(1)},${y(v).toFixed(1)}`;
  const upperPts = chart.upper.map((v, i) => point(i, v));
  const lowerPts = chart.lower.map((v, i) => point(i, v)).reverse();
  const band = `<polygon class="band" points="${[...upperPts, ...lowerPts].join(" ")}"/>`;
  const expected = `<polyline class="expected" fill="none" stroke-dasharray="6 4" points="${chart.expected
    .map((v, i) => point(i, v))
    .join(" ")}"/>`;
  const dots = chart.observed
    .map((obs, i) => {
      if (obs === null) return "";
      const flag = chart.flags[i] ?? "in-control";
      const fill = flag === ABOVE ? "#c0332b" : flag === BELOW ? "#946500" : "#27597a";
      return (
        `<circle class="dot ${flag}" data-week="${chart.weeks[i]}" ` +
        `data-value="${String(obs)}" cx="${x(i).toFixed(1)}" cy="${y(obs).toFixed(1)}" ` +
        `r="3.5" fill="${fill}"/>`
      );
    })
    .join("");
  const axis =
    `<text class="axis" x="${padL - 6}" y="${y(ymax / 1.08) + 4}" text-anchor="end">${fmt(ymax / 1.08)}</text>` +
    `<text class="axis" x="${padL - 6}" y="${H - padB + 4}" text-anchor="end">0</text>`;
  return `<svg class="spc" viewBox="0 0 ${W} ${H}" role="img">${band}${expected}${dots}${axis}</svg>`;
}

function chartTable(lang: Lang, chart: ChartPayload): string {
  const head =
    `<tr><th>${esc(t(lang, "week"))}</th>` +
    `<th>${esc(t(lang, "observed"))}</th>` +
    `<th>${esc(t(lang, "lower"))}</th>` +
    `<th>${esc(t(lang, "expected"))}</th>` +
    `<th>${esc(t(lang, "upper"))}</th>` +
    `<th>${esc(t(lang, "flag"))}</th></tr>`;
  const body = chart.weeks
    .map((week, i) => {
      const flag = chart.flags[i] ?? "in-control";
      return (
        `<tr data-week="${week}" data-flag="${esc(flag)}">` +
        `<td>${week}</td>` +
        cell(chart.observed[i] ?? null) +
        cell(chart.lower[i] ?? null) +
        cell(chart.expected[i] ?? null) +
        cell(chart.upper[i] ?? null) +
        `<td class="flag ${esc(flag)}">${esc(flagLabel(lang, flag))}</td>` +
        `</tr>`
      );
    })
    .join("");
  return `<table class="chart-table" id="chart-table"><thead>${head}</thead><tbody>${body}</tbody></table>`;
}

export function renderControlChart(state: FilterState, data: ChartData): string {
  const lang = state.lang;
  const filters =
    `<div class="filters">` +
    regionSelect(state, data.vocab, false) +
    groupSelect(state, data.vocab, false) +
    levelSelect(state) +
    `</div>`;
  if (data.chart === null) {
    return (
      filters +
      `<p class="hint">${esc(t(lang, "controlChart"))}: ${esc(
        t(lang, "region"),
      )} + ${esc(t(lang, "speciesGroup"))}</p>`
    );
  }
  const chart = data.chart;
  const title =
    `<h2>${esc(t(lang, "region"))} ${chart.region} · ` +
    `${esc(groupLabel(lang, chart.species))} · ` +
    `<span data-value="${String(chart.level)}">${Math.round(chart.level * 100)}%</span></h2>`;
  return (
    filters +
    `<section class="panel" data-region="${chart.region}" data-group="${esc(chart.species)}">` +
    title +
    chartSvg(chart) +
    chartTable(lang, chart) +
    `</section>`
  );
}

// ---------------------------------------------------------------------------
// alerts

export function renderAlertPanel(state: FilterState, data: AlertData): string {
  const lang = state.lang;
  const filters = `<div class="filters">` + levelSelect(state) + `</div>`;
  if (data.alerts.length === 0) {
    return filters + `<p class="empty">${esc(t(lang, "noAlerts"))}</p>`;
  }
  const head =
    `<tr><th>${esc(t(lang, "region"))}</th>` +
    `<th>${esc(t(lang, "speciesGroup"))}</th>` +
    `<th>${esc(t(lang, "week"))}</th>` +
    `<th>${esc(t(lang, "observed"))}</th>` +
    `<th>${esc(t(lang, "upper"))}</th>` +
    `<th>${esc(t(lang, "exceedance"))}</th>` +
    `<th></th></tr>`;
  const body = data.alerts
    .map((row) => {
      const href = chartLink(state, row.region, row.species);
      return (
        `<tr class="alert-row" data-region="${row.region}" ` +
        `data-group="${esc(row.species)}" data-week="${row.week}">` +
        `<td>${row.region}</td>` +
        `<td>${esc(groupLabel(lang, row.species))}</td>` +
        `<td>${row.week}</td>` +
        cell(row.observed) +
        cell(row.upper) +
        cell(row.exceedance) +
        `<td><a class="open-chart" href="${esc(href)}">${esc(
          t(lang, "openChart"),
        )}</a></td></tr>`
      );
    })
    .join("");
  return (
    filters +
    `<table class="alerts" id="alert-table"><thead>${head}</thead><tbody>${body}</tbody></table>`
  );
}
