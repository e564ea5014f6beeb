/** Payload shapes of the surveillance service, mirrored field-for-field.
 *
 * The dashboard displays these values verbatim; nothing here is computed
 * client-side.
 */

export interface HealthPayload {
  status: string;
  spec_hash: string;
  format_version: string;
}

export interface Vocab {
  regions: number[];
  groups: string[];
  ages: string[];
  genders: string[];
  species: string[];
}

/** Row of GET /summary?by=region (sorted by total, descending). */
export interface RegionRow {
  region: number;
  total: number;
  weekly_mean: number;
  max: number;
  n_visits: number;
}

/** Row of GET /summary?by=group. */
export interface GroupRow {
  species_group: string;
  min: number;
  q1: number;
  median: number;
  mean: number;
  q3: number;
  max: number;
  total: number;
}

/** Row of GET /summary?by=species (bilingual names, ranked). */
export interface SpeciesRow {
  species_name: string;
  total: number;
}

export interface SeriesPayload {
  weeks: number[];
  weekly: number[];
  cumulative: number[];
  monthly: number[];
  monthly_ratios: number[];
  average_monthly_ratio: number | null;
  total: number;
}

export interface ChartPayload {
  region: number;
  species: string;
  level: number;
  band: string;
  weeks: number[];
  expected: number[];
  lower: number[];
  upper: number[];
  observed: (number | null)[];
  flags: string[];
}

export interface AlertRow {
  region: number;
  species: string;
  week: number;
  observed: number;
  upper: number;
  /** observed/upper, or null when the upper band is zero. */
  exceedance: number | null;
}

export interface FieldPayload {
  month: number;
  resolution_deg: number;
  lon: number[];
  lat: number[];
  /** Row-major over (lat, lon); null outside the mesh hull. */
  values: (number | null)[][];
}

export interface MeshPayload {
  origin: [number, number];
  vertices: [number, number][];
  triangles: [number, number, number][];
}
