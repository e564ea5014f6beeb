import { describe, expect, it } from "vitest";

import { esc, renderAlertPanel } from "../src/render.js";
import { DEFAULT_STATE, chartLink } from "../src/state.js";
import type { AlertRow, Vocab } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const vocab = loadFixture<Vocab>("regions.json");
const alerts = loadFixture<AlertRow[]>("alerts.json");

const html = renderAlertPanel(DEFAULT_STATE, { vocab, alerts });

describe("alert panel rendering", () => {
  it("renders one row per alert, in server order", () => {
    const rows = [
      ...html.matchAll(
        /<tr class="alert-row" data-region="(\d+)" data-group="([A-Z]+)" data-week="(\d+)">/g,
      ),
    ].map((m) => [Number(m[1]), m[2], Number(m[3])]);
    expect(rows).toEqual(alerts.map((a) => [a.region, a.species, a.week]));
  });

  it("repeats the observed, upper, and exceedance figures exactly", () => {
    for (const alert of alerts) {
      const match = html.match(
        new RegExp(
          `<tr class="alert-row" data-region="${alert.region}" ` +
            `data-group="${alert.species}" data-week="${alert.week}">([\\s\\S]*?)</tr>`,
        ),
      );
      expect(match).not.toBeNull();
      const row = (match as RegExpMatchArray)[0];
      for (const value of [alert.observed, alert.upper, alert.exceedance]) {
        if (value === null) continue; // zero upper band: exceedance unbounded
        expect(row).toContain(`data-value="${String(value)}"`);
      }
    }
  });

  it("deep-links every alert to its control chart", () => {
    for (const alert of alerts) {
      const href = esc(chartLink(DEFAULT_STATE, alert.region, alert.species));
      expect(html).toContain(`href="${href}"`);
    }
  });

  it("shows an empty message when nothing is above band", () => {
    const empty = renderAlertPanel(DEFAULT_STATE, { vocab, alerts: [] });
    expect(empty).toContain("No above-band weeks at this level.");
    expect(empty).not.toContain("alert-row");
  });
});
