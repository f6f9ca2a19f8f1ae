#!/usr/bin/env node
/** figures <run_dir> --fig all|init|convergence|snapshots|differences --out <dir> */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { ArtifactError } from "./csv.js";
import { FIGURE_IDS, FigureId, buildFigure } from "./figures.js";

const USAGE =
  "usage: figures <run_dir> --fig all|init|convergence|snapshots|differences --out <dir>";

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        fig: { type: "string", default: "all" },
        out: { type: "string" },
      },
    });
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(USAGE);
    return 1;
  }
  const { positionals, values } = parsed;
  if (positionals.length !== 1 || !values.out) {
    console.error(USAGE);
    return 1;
  }
  const runDir = positionals[0];
  const wanted: FigureId[] =
    values.fig === "all"
      ? [...FIGURE_IDS]
      : FIGURE_IDS.includes(values.fig as FigureId)
        ? [values.fig as FigureId]
        : [];
  if (wanted.length === 0) {
    console.error(`unknown figure ${JSON.stringify(values.fig)}`);
    console.error(USAGE);
    return 1;
  }
  mkdirSync(values.out, { recursive: true });
  for (const id of wanted) {
    let figure;
    try {
      figure = buildFigure(runDir, id);
    } catch (err) {
      if (err instanceof ArtifactError) {
        console.error(err.message);
        return 1;
      }
      throw err;
    }
    writeFileSync(join(values.out, `${id}.svg`), figure.svg, "utf-8");
    writeFileSync(
      join(values.out, `${id}.json`),
      JSON.stringify(figure.series, null, 2) + "\n",
      "utf-8",
    );
    console.log(`wrote ${join(values.out, id)}.{svg,json}`);
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
