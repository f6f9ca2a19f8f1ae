import { describe, expect, it } from "vitest";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import {
  buildConvergence,
  buildDifferences,
  buildFigure,
  buildInit,
  buildSnapshots,
  spacedIndices,
} from "../src/figures.js";
import { toGridSeries } from "../src/artifacts.js";
import { ArtifactError } from "../src/csv.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const RUN = join(HERE, "fixture", "run");

function panelCount(svg: string): number {
  return (svg.match(/<g class="panel"/g) ?? []).length;
}

describe("figure rendering from the committed run", () => {
  it("renders all four figures", () => {
    for (const id of ["init", "convergence", "snapshots", "differences"] as const) {
      const fig = buildFigure(RUN, id);
      expect(fig.svg.startsWith("<svg ")).toBe(true);
      expect(fig.svg.trimEnd().endsWith("</svg>")).toBe(true);
      expect(panelCount(fig.svg)).toBeGreaterThan(0);
    }
  });

  it("convergence series are both non-increasing", () => {
    const fig = buildConvergence(RUN);
    const series = fig.series as {
      local: { risk: number[] };
      nonlocal: { risk: number[] };
    };
    for (const arm of [series.local.risk, series.nonlocal.risk]) {
      expect(arm.length).toBeGreaterThan(1);
      for (let i = 1; i < arm.length; i++) {
        expect(arm[i]).toBeLessThanOrEqual(arm[i - 1]);
      }
    }
  });

  it("snapshot figure holds exactly six time panels, t = 0 and T included", () => {
    const fig = buildSnapshots(RUN);
    expect(panelCount(fig.svg)).toBe(6);
    const panels = (fig.series as { panels: { t: number }[] }).panels;
    expect(panels).toHaveLength(6);
    const m = toGridSeries(join(RUN, "nonlocal", "m.csv"));
    expect(panels[0].t).toBe(m.times[0]);
    expect(panels[5].t).toBe(m.times[m.times.length - 1]);
  });

  it("init figure peaks at x = 0 and dips at x = 0.5", () => {
    const fig = buildInit(RUN);
    const s = fig.series as { x: number[]; density: number[]; terminalCost: number[] };
    const peak = s.x[s.density.indexOf(Math.max(...s.density))];
    const dip = s.x[s.terminalCost.indexOf(Math.min(...s.terminalCost))];
    expect(peak).toBe(0);
    expect(dip).toBeCloseTo(0.5, 10);
  });

  it("differences figure carries both panels with matching shapes", () => {
    const fig = buildDifferences(RUN);
    expect(panelCount(fig.svg)).toBe(2);
    const s = fig.series as { penalty: number[][]; density: number[][]; xs: number[] };
    expect(s.penalty.length).toBe(s.density.length);
    expect(s.penalty[0].length).toBe(s.xs.length);
  });

  it("same run dir renders byte-identical output", () => {
    const a = buildFigure(RUN, "snapshots");
    const b = buildFigure(RUN, "snapshots");
    expect(a.svg).toBe(b.svg);
    expect(JSON.stringify(a.series)).toBe(JSON.stringify(b.series));
  });

  it("missing artifacts raise errors naming the path", () => {
    expect(() => buildFigure(join(HERE, "fixture", "nowhere"), "convergence")).toThrowError(
      ArtifactError,
    );
    try {
      buildFigure(join(HERE, "fixture", "nowhere"), "convergence");
    } catch (err) {
      expect((err as ArtifactError).message).toContain("risk_history.csv");
    }
  });
});

describe("index spacing", () => {
  it("always includes both endpoints", () => {
    expect(spacedIndices(33, 6)).toEqual([0, 6, 13, 19, 26, 32]);
    expect(spacedIndices(6, 6)).toEqual([0, 1, 2, 3, 4, 5]);
  });

  it("refuses when there are too few slices", () => {
    expect(() => spacedIndices(5, 6)).toThrowError(/at least 6/);
  });
});
