/** Strict reader for the solver's numeric CSV artifacts. */

import { readFileSync } from "node:fs";

export interface Table {
  path: string;
  columns: string[];
  /** column name -> values, one entry per data row */
  data: Record<string, number[]>;
  rowCount: number;
}

export class ArtifactError extends Error {
  constructor(message: string, readonly path: string) {
    super(message);
    this.name = "ArtifactError";
  }
}

export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch {
    throw new ArtifactError(`missing artifact: ${path}`, path);
  }
  const lines = text.split("\n");
  while (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  if (lines.length < 2) {
    throw new ArtifactError(`empty artifact: ${path}`, path);
  }
  const columns = lines[0].split(",");
  const data: Record<string, number[]> = {};
  for (const c of columns) data[c] = [];
  for (let r = 1; r < lines.length; r++) {
    const parts = lines[r].split(",");
    if (parts.length !== columns.length) {
      throw new ArtifactError(
        `row ${r} of ${path} has ${parts.length} fields, expected ${columns.length}`,
        path,
      );
    }
    for (let c = 0; c < columns.length; c++) {
      const v = Number(parts[c]);
      if (!Number.isFinite(v)) {
        throw new ArtifactError(`non-numeric value ${JSON.stringify(parts[c])} in ${path}`, path);
      }
      data[columns[c]].push(v);
    }
  }
  return { path, columns, data, rowCount: lines.length - 1 };
}

export function requireColumns(table: Table, names: string[]): void {
  for (const n of names) {
    if (!(n in table.data)) {
      throw new ArtifactError(`column ${JSON.stringify(n)} missing from ${table.path}`, table.path);
    }
  }
}
