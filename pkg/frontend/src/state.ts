/** Filter state, round-tripped through the URL query string so every view
 * is a shareable link.
 */

export type View = "overview" | "chart" | "alerts";
export type Lang = "en" | "es";

export interface FilterState {
  view: View;
  region: number | null;
  group: string | null;
  age: string | null;
  gender: string | null;
  /** SPC credible level, in (0, 1). */
  level: number;
  /** Month shown on the spatial-field map, 1-6. */
  month: number;
  lang: Lang;
}

export const DEFAULT_STATE: FilterState = {
  view: "overview",
  region: null,
  group: null,
  age: null,
  gender: null,
  level: 0.8,
  month: 1,
  lang: "en",
};

const VIEWS: View[] = ["overview", "chart", "alerts"];
const LANGS: Lang[] = ["en", "es"];

/** Parse a query string ("?a=b" or "a=b"); malformed values fall back to
 * the defaults so stale links still render. */
export function parseState(query: string): FilterState {
  const params = new URLSearchParams(
    query.startsWith("?") ? query.slice(1) : query,
  );
  const state: FilterState = { ...DEFAULT_STATE };

  const view = params.get("view");
  if (view && (VIEWS as string[]).includes(view)) state.view = view as View;

  const region = params.get("region");
  if (region !== null && /^\d+$/.test(region)) state.region = parseInt(region, 10);

  const group = params.get("group");
  if (group) state.group = group;
  const age = params.get("age");
  if (age) state.age = age;
  const gender = params.get("gender");
  if (gender) state.gender = gender;

  const level = params.get("level");
  if (level !== null) {
    const value = Number(level);
    if (Number.isFinite(value) && value > 0 && value < 1) state.level = value;
  }

  const month = params.get("month");
  if (month !== null && /^\d+$/.test(month)) {
    const value = parseInt(month, 10);
    if (value >= 1 && value <= 6) state.month = value;
  }

  const lang = params.get("lang");
  if (lang && (LANGS as string[]).includes(lang)) state.lang = lang as Lang;

  return state;
}

/** Serialize only the fields that differ from the defaults, in a stable
 * key order, so equal states produce byte-equal links. */
export function serializeState(state: FilterState): string {
  const params = new URLSearchParams();
  if (state.view !== DEFAULT_STATE.view) params.set("view", state.view);
  if (state.region !== null) params.set("region", String(state.region));
  if (state.group !== null) params.set("group", state.group);
  if (state.age !== null) params.set("age", state.age);
  if (state.gender !== null) params.set("gender", state.gender);
  if (state.level !== DEFAULT_STATE.level) params.set("level", String(state.level));
  if (state.month !== DEFAULT_STATE.month) params.set("month", String(state.month));
  if (state.lang !== DEFAULT_STATE.lang) params.set("lang", state.lang);
  const text = params.toString();
  return text ? `?${text}` : "";
}

/** Link to the control chart of one region x group cell (alert rows and
 * ranking rows deep-link through this). */
export function chartLink(state: FilterState, region: number, group: string): string {
  return serializeState({ ...state, view: "chart", region, group });
}
