/** Bilingual interface labels.  Species names arrive from the service
 * already in their bilingual "Común - Latin" form and pass through.
 */

import type { Lang } from "./state.js";

const EN = {
  title: "Coastal stranding surveillance",
  overview: "Overview",
  controlChart: "Control chart",
  alerts: "Alerts",
  region: "Region",
  allRegions: "All regions",
  speciesGroup: "Species group",
  allGroups: "All groups",
  age: "Age",
  gender: "Gender",
  any: "Any",
  level: "Band level",
  month: "Month",
  week: "Week",
  observed: "Observed",
  expected: "Expected",
  lower: "Lower",
  upper: "Upper",
  flag: "Flag",
  exceedance: "Exceedance",
  total: "Sum",
  weeklyMean: "Mean",
  max: "Max",
  visits: "n",
  cumulative: "Cumulative registered animals",
  ranking: "Region ranking",
  speciesRanking: "Species ranking",
  map: "Posterior spatial field",
  aboveBand: "above band",
  inControl: "in control",
  belowBand: "below band",
  noAlerts: "No above-band weeks at this level.",
  openChart: "open chart",
  apiError: "Service unavailable",
  language: "ES",
  low: "low",
  high: "high",
};

const ES: typeof EN = {
  title: "Vigilancia de varamientos costeros",
  overview: "Resumen",
  controlChart: "Carta de control",
  alerts: "Alertas",
  region: "Región",
  allRegions: "Todas las regiones",
  speciesGroup: "Grupo de especies",
  allGroups: "Todos los grupos",
  age: "Edad",
  gender: "Sexo",
  any: "Cualquiera",
  level: "Nivel de banda",
  month: "Mes",
  week: "Semana",
  observed: "Observado",
  expected: "Esperado",
  lower: "Inferior",
  upper: "Superior",
  flag: "Estado",
  exceedance: "Exceso",
  total: "Suma",
  weeklyMean: "Media",
  max: "Máx",
  visits: "n",
  cumulative: "Animales registrados acumulados",
  ranking: "Ranking por región",
  speciesRanking: "Ranking por especie",
  map: "Campo espacial posterior",
  aboveBand: "sobre la banda",
  inControl: "bajo control",
  belowBand: "bajo la banda",
  noAlerts: "Sin semanas sobre la banda a este nivel.",
  openChart: "abrir carta",
  apiError: "Servicio no disponible",
  language: "EN",
  low: "bajo",
  high: "alto",
};

export type LabelKey = keyof typeof EN;

export function t(lang: Lang, key: LabelKey): string {
  return (lang === "es" ? ES : EN)[key];
}

const GROUP_EN: Record<string, string> = {
  PI: "Pinnipeds",
  BI: "Birds (penguins)",
  CE: "Cetaceans",
  MU: "Mustelids",
  QU: "Chelonians",
  UND: "Undefined",
};

const GROUP_ES: Record<string, string> = {
  PI: "Pinnípedos",
  BI: "Aves (pingüinos)",
  CE: "Cetáceos",
  MU: "Mustélidos",
  QU: "Quelonios",
  UND: "Indeterminado",
};

/** Human name for a species-group code; unknown codes pass through. */
export function groupLabel(lang: Lang, code: string): string {
  const table = lang === "es" ? GROUP_ES : GROUP_EN;
  return table[code] ?? code;
}

const FLAG_KEY: Record<string, LabelKey> = {
  "above-band": "aboveBand",
  "in-control": "inControl",
  "below-band": "belowBand",
};

export function flagLabel(lang: Lang, flag: string): string {
  const key = FLAG_KEY[flag];
  return key ? t(lang, key) : flag;
}
