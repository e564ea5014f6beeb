/** Browser entry point: URL state in, rendered HTML out.
 *
 * All markup comes from the pure renderers; this module only owns the
 * fetch/render/history loop and the control event listeners.
 */

import { ApiError, Client } from "./api.js";
import { parseState, serializeState } from "./state.js";
import type { FilterState } from "./state.js";
import {
  renderAlertPanel,
  renderControlChart,
  renderError,
  renderOverview,
  renderShell,
} from "./render.js";

const client = new Client("");
const root = document.getElementById("app");
let current: FilterState = parseState(window.location.search);

async function viewBody(state: FilterState): Promise<string> {
  if (state.view === "chart") {
    const vocab = await client.regions();
    if (state.region === null || state.group === null) {
      return renderControlChart(state, { vocab, chart: null });
    }
    const chart = await client.chart(state.region, state.group, state.level);
    return renderControlChart(state, { vocab, chart });
  }
  if (state.view === "alerts") {
    const [vocab, alerts] = await Promise.all([
      client.regions(),
      client.alerts(state.level),
    ]);
    return renderAlertPanel(state, { vocab, alerts });
  }
  const [vocab, series, regions, groups, species, field, mesh] =
    await Promise.all([
      client.regions(),
      client.series(state),
      client.summaryByRegion(),
      client.summaryByGroup(),
      client.summaryBySpecies(),
      client.field(state.month),
      client.mesh(),
    ]);
  return renderOverview(state, {
    vocab,
    series,
    regions,
    groups,
    species,
    field,
    mesh,
  });
}

async function rerender(): Promise<void> {
  if (root === null) return;
  try {
    root.innerHTML = renderShell(current, await viewBody(current));
  } catch (err) {
    const message =
      err instanceof ApiError ? `${err.status}: ${err.detail}` : String(err);
    root.innerHTML = renderShell(current, renderError(current.lang, message));
  }
  bindControls();
}

function navigate(state: FilterState): void {
  current = state;
  const query = serializeState(state);
  window.history.pushState(
    null,
    "",
    query === "" ? window.location.pathname : query,
  );
  void rerender();
}

function onSelect(id: string, apply: (value: string) => FilterState): void {
  const el = document.getElementById(id);
  if (el === null) return;
  el.addEventListener("change", (ev) => {
    navigate(apply((ev.target as HTMLSelectElement).value));
  });
}

function bindControls(): void {
  onSelect("region-select", (v) => ({
    ...current,
    region: v === "" ? null : Number(v),
  }));
  onSelect("group-select", (v) => ({
    ...current,
    group: v === "" ? null : v,
  }));
  onSelect("age-select", (v) => ({ ...current, age: v === "" ? null : v }));
  onSelect("gender-select", (v) => ({
    ...current,
    gender: v === "" ? null : v,
  }));
  onSelect("level-select", (v) => ({ ...current, level: Number(v) }));
  onSelect("month-select", (v) => ({ ...current, month: Number(v) }));
}

document.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement | null;
  const anchor = target?.closest("a");
  if (!anchor) return;
  const href = anchor.getAttribute("href") ?? "";
  if (!href.startsWith("?")) return;
  ev.preventDefault();
  navigate(parseState(href === "?" ? "" : href));
});

window.addEventListener("popstate", () => {
  current = parseState(window.location.search);
  void rerender();
});

void rerender();
