#!/usr/bin/env node
/** dnl-report <run_dir> [--format png|svg] [--out DIR]
 *
 * Regenerates the figures for a completed run directory from its CSV and
 * JSON artifacts alone, re-asserting the numeric claims each figure
 * shows.  Exit codes: 0 all figures written and re-assertions passed,
 * 1 a re-assertion failed, 2 missing or invalid artifacts.
 */

import { join } from "node:path";

import { ArtifactError, readReport } from "./csv.js";
import {
  AssertionViolation,
  FigureResult,
  Format,
  ladderTable,
  plotContraction,
  plotEnergy,
  plotSmoothing,
} from "./plots.js";

function usage(): never {
  console.error("usage: dnl-report <run_dir> [--format png|svg] [--out DIR]");
  process.exit(2);
}

export function main(argv: string[]): number {
  let runDir: string | null = null;
  let format: Format = "svg";
  let outDir: string | null = null;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--format") {
      const v = argv[++i];
      if (v !== "png" && v !== "svg") usage();
      format = v;
    } else if (a === "--out") {
      outDir = argv[++i] ?? usage();
    } else if (a.startsWith("-")) {
      usage();
    } else if (runDir === null) {
      runDir = a;
    } else {
      usage();
    }
  }
  if (runDir === null) usage();
  const out = outDir ?? join(runDir, "figures");

  try {
    const report = readReport(join(runDir, "report.json"));
    const results: FigureResult[] = [plotEnergy(runDir, out, format)];
    const kind = report.experiment ?? "simulate";
    if (kind === "smoothing") {
      results.push(plotSmoothing(runDir, out, format));
    }
    if (kind === "contraction") {
      results.push(plotContraction(runDir, out, format));
    }
    if (kind === "ladder") {
      results.push(ladderTable(runDir, out));
    }
    for (const r of results) {
      console.log(`wrote ${r.file}`);
      for (const c of r.checks) console.log(`  check: ${c}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof AssertionViolation) {
      console.error(`re-assertion failed: ${err.message}`);
      return 1;
    }
    if (err instanceof ArtifactError) {
      console.error(`artifact error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
