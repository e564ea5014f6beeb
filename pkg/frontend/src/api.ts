/** Thin typed client over the surveillance service.
 *
 * Every method is a single GET returning the parsed JSON body unchanged:
 * the dashboard never re-derives a number the service already computed.
 */

import type {
  AlertRow,
  ChartPayload,
  FieldPayload,
  GroupRow,
  HealthPayload,
  MeshPayload,
  RegionRow,
  SeriesPayload,
  SpeciesRow,
  Vocab,
} from "./types.js";
import type { FilterState } from "./state.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class Client {
  constructor(private readonly base: string = "") {}

  private async get<T>(path: string, params?: Record<string, string>): Promise<T> {
    let url = this.base + path;
    if (params && Object.keys(params).length > 0) {
      url += `?${new URLSearchParams(params).toString()}`;
    }
    const res = await fetch(url);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  health(): Promise<HealthPayload> {
    return this.get("/health");
  }

  regions(): Promise<Vocab> {
    return this.get("/regions");
  }

  summaryByRegion(): Promise<RegionRow[]> {
    return this.get("/summary", { by: "region" });
  }

  summaryByGroup(): Promise<GroupRow[]> {
    return this.get("/summary", { by: "group" });
  }

  summaryBySpecies(): Promise<SpeciesRow[]> {
    return this.get("/summary", { by: "species" });
  }

  series(state: FilterState): Promise<SeriesPayload> {
    const params: Record<string, string> = {};
    if (state.region !== null) params.region = String(state.region);
    if (state.group !== null) params.group = state.group;
    if (state.age !== null) params.age = state.age;
    if (state.gender !== null) params.gender = state.gender;
    return this.get("/series", params);
  }

  chart(region: number, group: string, level?: number): Promise<ChartPayload> {
    const params: Record<string, string> = {};
    if (level !== undefined) params.level = String(level);
    return this.get(`/chart/${region}/${encodeURIComponent(group)}`, params);
  }

  alerts(level?: number): Promise<AlertRow[]> {
    const params: Record<string, string> = {};
    if (level !== undefined) params.level = String(level);
    return this.get("/alerts", params);
  }

  field(month: number): Promise<FieldPayload> {
    return this.get(`/field/${month}`);
  }

  mesh(): Promise<MeshPayload> {
    return this.get("/mesh");
  }
}
