/** Run-directory readers: reshape long-form CSVs into per-slice series.
 *
 * Everything a figure needs is already an artifact: m.csv's first slice is
 * the initial density, p.csv's last slice is the terminal cost (the adjoint
 * terminal condition), risk_history.csv carries the per-iteration risk, and
 * differences.csv holds the nonlocal-minus-local fields. Nothing is
 * recomputed here.
 */

import { existsSync } from "node:fs";
import { join } from "node:path";

import { ArtifactError, readTable, requireColumns } from "./csv.js";

export interface GridSeries {
  times: number[];
  xs: number[];
  /** rows[k][i] = value at (times[k], xs[i]) */
  rows: number[][];
}

export interface RiskHistory {
  iter: number[];
  riskTotal: number[];
}

export interface ArmPair {
  /** arm directory names present under the run dir */
  local: string;
  nonlocal: string;
}

/** Group a long-form (t, x, value...) table into slices, in file order. */
export function toGridSeries(path: string, valueColumn = "value"): GridSeries {
  const table = readTable(path);
  requireColumns(table, ["t", "x", valueColumn]);
  const t = table.data.t;
  const x = table.data.x;
  const v = table.data[valueColumn];
  const times: number[] = [];
  const xs: number[] = [];
  const rows: number[][] = [];
  let row: number[] = [];
  for (let r = 0; r < table.rowCount; r++) {
    if (times.length === 0 || t[r] !== times[times.length - 1]) {
      times.push(t[r]);
      row = [];
      rows.push(row);
    }
    if (times.length === 1) xs.push(x[r]);
    row.push(v[r]);
  }
  for (const r of rows) {
    if (r.length !== xs.length) {
      throw new ArtifactError(`ragged slices in ${path}`, path);
    }
  }
  return { times, xs, rows };
}

export function loadRiskHistory(path: string): RiskHistory {
  const table = readTable(path);
  requireColumns(table, ["iter", "risk_total"]);
  return { iter: table.data.iter, riskTotal: table.data.risk_total };
}

export function armPair(runDir: string): ArmPair {
  return { local: join(runDir, "local"), nonlocal: join(runDir, "nonlocal") };
}

/** Arm directory to read single-arm data from; the nonlocal arm wins. */
export function preferredArm(runDir: string): string {
  const arms = armPair(runDir);
  if (existsSync(join(arms.nonlocal, "m.csv"))) return arms.nonlocal;
  return arms.local;
}

export function loadDifferences(runDir: string): { penalty: GridSeries; density: GridSeries } {
  const path = join(runDir, "differences.csv");
  return {
    penalty: toGridSeries(path, "penalty_diff"),
    density: toGridSeries(path, "density_diff"),
  };
}
