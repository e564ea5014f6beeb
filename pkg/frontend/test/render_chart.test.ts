import { describe, expect, it } from "vitest";

import { renderControlChart } from "../src/render.js";
import { DEFAULT_STATE } from "../src/state.js";
import type { FilterState } from "../src/state.js";
import type { ChartPayload, Vocab } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const vocab = loadFixture<Vocab>("regions.json");
const chart = loadFixture<ChartPayload>("chart_15_PI.json");

const state: FilterState = {
  ...DEFAULT_STATE,
  view: "chart",
  region: chart.region,
  group: chart.species,
  level: chart.level,
};
const html = renderControlChart(state, { vocab, chart });

function tableRow(week: number): string {
  const match = html.match(
    new RegExp(`<tr data-week="${week}"[^>]*>([\\s\\S]*?)</tr>`),
  );
  expect(match, `table row for week ${week}`).not.toBeNull();
  return (match as RegExpMatchArray)[0];
}

describe("control chart rendering", () => {
  it("repeats every fixture number in a data-value attribute", () => {
    chart.weeks.forEach((week, i) => {
      const row = tableRow(week);
      const observed = chart.observed[i];
      if (observed !== null && observed !== undefined) {
        expect(row).toContain(`data-value="${String(observed)}"`);
      }
      for (const value of [chart.lower[i], chart.expected[i], chart.upper[i]]) {
        expect(row).toContain(`data-value="${String(value)}"`);
      }
      expect(row).toContain(`data-flag="${chart.flags[i]}"`);
    });
  });

  it("shows the chart level", () => {
    expect(html).toContain(`data-value="${String(chart.level)}"`);
  });

  it("draws one dot per observed week and none in gaps", () => {
    const observedWeeks = chart.weeks.filter(
      (_, i) => chart.observed[i] !== null,
    );
    const dots = html.match(/<circle class="dot /g) ?? [];
    expect(dots.length).toBe(observedWeeks.length);
    chart.weeks.forEach((week, i) => {
      if (chart.observed[i] === null) {
        expect(html).not.toMatch(new RegExp(`<circle[^>]*data-week="${week}"`));
      }
    });
  });

  it("marks above-band weeks red, and only those", () => {
    const aboveCount = chart.flags.filter((f) => f === "above-band").length;
    const redDots = html.match(/class="dot above-band"/g) ?? [];
    expect(redDots.length).toBe(aboveCount);
    const redFills = html.match(/fill="#c0332b"/g) ?? [];
    expect(redFills.length).toBe(aboveCount);
  });

  it("keeps the band drawn under the dots", () => {
    const band = html.indexOf('<polygon class="band"');
    const firstDot = html.indexOf('<circle class="dot');
    expect(band).toBeGreaterThan(-1);
    if (firstDot !== -1) expect(band).toBeLessThan(firstDot);
  });
});
