import { describe, expect, it } from "vitest";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ArtifactError, readTable } from "../src/csv.js";
import { toGridSeries } from "../src/artifacts.js";

function tempCsv(text: string): string {
  const dir = mkdtempSync(join(tmpdir(), "figcsv-"));
  const path = join(dir, "t.csv");
  writeFileSync(path, text, "utf-8");
  return path;
}

describe("csv reader", () => {
  it("parses columns by name", () => {
    const path = tempCsv("t,x,value\n0,0,1.5\n0,0.5,2\n1,0,3\n1,0.5,4\n");
    const table = readTable(path);
    expect(table.columns).toEqual(["t", "x", "value"]);
    expect(table.data.value).toEqual([1.5, 2, 3, 4]);
    expect(table.rowCount).toBe(4);
  });

  it("rejects missing files with the path in the message", () => {
    expect(() => readTable("/no/such/file.csv")).toThrowError(ArtifactError);
    expect(() => readTable("/no/such/file.csv")).toThrowError(/\/no\/such\/file\.csv/);
  });

  it("rejects ragged and non-numeric rows", () => {
    expect(() => readTable(tempCsv("a,b\n1\n"))).toThrowError(/row 1/);
    expect(() => readTable(tempCsv("a,b\n1,x\n"))).toThrowError(/non-numeric/);
    expect(() => readTable(tempCsv("a,b\n"))).toThrowError(/empty/);
  });

  it("reshapes long-form tables into slices in file order", () => {
    const path = tempCsv("t,x,value\n0,0,1\n0,0.5,2\n0.25,0,3\n0.25,0.5,4\n");
    const grid = toGridSeries(path);
    expect(grid.times).toEqual([0, 0.25]);
    expect(grid.xs).toEqual([0, 0.5]);
    expect(grid.rows).toEqual([
      [1, 2],
      [3, 4],
    ]);
  });

  it("rejects ragged slices", () => {
    const path = tempCsv("t,x,value\n0,0,1\n0,0.5,2\n1,0,3\n");
    expect(() => toGridSeries(path)).toThrowError(/ragged/);
  });
});
