/** The four reference figures, built from run-directory artifacts only.
 *
 * Conventions follow the source material: local arm dashed, nonlocal arm
 * solid. Each builder returns the SVG text plus the exact arrays that were
 * plotted, so regenerated figures can be diffed numerically.
 */

import { join } from "node:path";

import { ArtifactError } from "./csv.js";
import {
  GridSeries,
  armPair,
  loadDifferences,
  loadRiskHistory,
  preferredArm,
  toGridSeries,
} from "./artifacts.js";
import {
  HeatPanel,
  Legend,
  composeFigure,
  renderHeatPanel,
  renderLinePanel,
} from "./svg.js";

export const FIGURE_IDS = ["init", "convergence", "snapshots", "differences"] as const;
export type FigureId = (typeof FIGURE_IDS)[number];

export interface Figure {
  id: FigureId;
  svg: string;
  series: unknown;
}

const ARM_LEGEND: Legend = {
  entries: [
    { label: "local (dashed)", dashed: true },
    { label: "nonlocal (solid)", dashed: false },
  ],
};

/** n evenly spaced indices over [0, len-1], first and last included. */
export function spacedIndices(len: number, n: number): number[] {
  if (len < n) {
    throw new Error(`need at least ${n} slices, got ${len}`);
  }
  const out: number[] = [];
  for (let i = 0; i < n; i++) out.push(Math.round(((len - 1) * i) / (n - 1)));
  return out;
}

export function buildInit(runDir: string): Figure {
  const arm = preferredArm(runDir);
  const density = toGridSeries(join(arm, "m.csv"));
  const adjoint = toGridSeries(join(arm, "p.csv"));
  const m0 = density.rows[0];
  // the adjoint's terminal slice is the terminal cost itself
  const psi = adjoint.rows[adjoint.rows.length - 1];
  const panels = [
    renderLinePanel({
      title: "initial density",
      series: [{ label: "m0", x: density.xs, y: m0, dashed: false }],
      xLabel: "x",
      yLabel: "m(0, x)",
    }),
    renderLinePanel({
      title: "terminal cost",
      series: [{ label: "psi", x: adjoint.xs, y: psi, dashed: false }],
      xLabel: "x",
      yLabel: "cost",
    }),
  ];
  return {
    id: "init",
    svg: composeFigure(panels, 2),
    series: { x: density.xs, density: m0, terminalCost: psi },
  };
}

export function buildConvergence(runDir: string): Figure {
  const arms = armPair(runDir);
  const local = loadRiskHistory(join(arms.local, "risk_history.csv"));
  const nonlocal = loadRiskHistory(join(arms.nonlocal, "risk_history.csv"));
  const panel = renderLinePanel({
    title: "risk per accepted iterate",
    series: [
      { label: "local", x: local.iter, y: local.riskTotal, dashed: true },
      { label: "nonlocal", x: nonlocal.iter, y: nonlocal.riskTotal, dashed: false },
    ],
    xLabel: "iteration",
    yLabel: "risk",
  });
  return {
    id: "convergence",
    svg: composeFigure([panel], 1, ARM_LEGEND),
    series: {
      local: { iter: local.iter, risk: local.riskTotal },
      nonlocal: { iter: nonlocal.iter, risk: nonlocal.riskTotal },
    },
  };
}

export function buildSnapshots(runDir: string): Figure {
  const arms = armPair(runDir);
  const local = toGridSeries(join(arms.local, "m.csv"));
  const nonlocal = toGridSeries(join(arms.nonlocal, "m.csv"));
  if (local.times.length !== nonlocal.times.length) {
    throw new ArtifactError(
      `arms dumped different slice counts (${local.times.length} vs ${nonlocal.times.length})`,
      join(arms.nonlocal, "m.csv"),
    );
  }
  const idx = spacedIndices(nonlocal.times.length, 6);
  const panels: string[] = [];
  const series: { t: number; x: number[]; local: number[]; nonlocal: number[] }[] = [];
  for (const k of idx) {
    panels.push(
      renderLinePanel({
        title: `t = ${nonlocal.times[k]}`,
        series: [
          { label: "local", x: local.xs, y: local.rows[k], dashed: true },
          { label: "nonlocal", x: nonlocal.xs, y: nonlocal.rows[k], dashed: false },
        ],
        xLabel: "x",
        yLabel: "density",
      }),
    );
    series.push({
      t: nonlocal.times[k],
      x: nonlocal.xs,
      local: local.rows[k],
      nonlocal: nonlocal.rows[k],
    });
  }
  return {
    id: "snapshots",
    svg: composeFigure(panels, 3, ARM_LEGEND),
    series: { panels: series },
  };
}

/** Thin a (t, x) series to at most maxRows time rows, keeping first and last. */
function thinned(series: GridSeries, maxRows: number): GridSeries {
  if (series.times.length <= maxRows) return series;
  const idx = spacedIndices(series.times.length, maxRows);
  return {
    times: idx.map((k) => series.times[k]),
    xs: series.xs,
    rows: idx.map((k) => series.rows[k]),
  };
}

export function buildDifferences(runDir: string): Figure {
  const diffs = loadDifferences(runDir);
  const penalty = thinned(diffs.penalty, 121);
  const density = thinned(diffs.density, 121);
  const toPanel = (s: GridSeries, title: string): HeatPanel => ({
    title,
    times: s.times,
    xs: s.xs,
    rows: s.rows,
    xLabel: "x",
    yLabel: "t",
  });
  const panels = [
    renderHeatPanel(toPanel(penalty, "penalty difference")),
    renderHeatPanel(toPanel(density, "density difference")),
  ];
  return {
    id: "differences",
    svg: composeFigure(panels, 2),
    series: {
      times: penalty.times,
      xs: penalty.xs,
      penalty: penalty.rows,
      density: density.rows,
    },
  };
}

export function buildFigure(runDir: string, id: FigureId): Figure {
  switch (id) {
    case "init":
      return buildInit(runDir);
    case "convergence":
      return buildConvergence(runDir);
    case "snapshots":
      return buildSnapshots(runDir);
    case "differences":
      return buildDifferences(runDir);
  }
}
