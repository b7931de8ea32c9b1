/** Figure builders over run artifacts.
 *
 * Every figure is regenerated from the CSV/JSON artifacts alone, and the
 * numeric claim a figure displays is re-checked here before the file is
 * written; a violation aborts with a nonzero exit.  Run directories are
 * never mutated beyond the figures written to the output directory.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { ChartSpec, layoutChart } from "./chart.js";
import { ArtifactError, RunReport, TrajectoryTable, parseTrajectoryCsv, readReport } from "./csv.js";
import { decayRate, smoothingExponent } from "./fit.js";
import { toPng } from "./raster.js";
import { toSvg } from "./svg.js";

export class AssertionViolation extends Error {}

export type Format = "png" | "svg";

export interface FigureResult {
  file: string;
  checks: string[];
}

function writeChart(spec: ChartSpec, outDir: string, stem: string, format: Format): string {
  const chart = layoutChart(spec);
  mkdirSync(outDir, { recursive: true });
  const file = join(outDir, `${stem}.${format}`);
  if (format === "svg") {
    writeFileSync(file, toSvg(chart), "utf-8");
  } else {
    writeFileSync(file, toPng(chart));
  }
  return file;
}

function checkEnergyMonotone(table: TrajectoryTable, report: RunReport): string {
  const lyap = report.lyapunov;
  const dt = report.dt;
  if (!lyap || typeof dt !== "number") {
    return "G monotonicity: no fitted envelope in report.json, skipped";
  }
  const g = table.G;
  const t = table.t;
  let violations = 0;
  for (let i = 1; i < g.length; i++) {
    const stride = Math.round((t[i] - t[i - 1]) / dt);
    if (g[i] - g[i - 1] > lyap.c_fit * dt * dt * stride) violations++;
  }
  if (violations > 0) {
    throw new AssertionViolation(
      `G increases beyond the fitted envelope at ${violations} record(s)`,
    );
  }
  return `G monotone within c_fit dt^2 envelope (${g.length} records)`;
}

export function plotEnergy(runDir: string, outDir: string, format: Format): FigureResult {
  const table = parseTrajectoryCsv(join(runDir, "trajectory.csv"));
  const report = readReport(join(runDir, "report.json"));
  const check = checkEnergyMonotone(table, report);
  const spec: ChartSpec = {
    title: "energy decay",
    xlabel: "t",
    ylabel: "value",
    series: [
      { x: table.t, y: table.E, color: "#1f77b4", label: "E" },
      { x: table.t, y: table.F, color: "#2ca02c", label: "F" },
      { x: table.t, y: table.G, color: "#d62728", label: "G" },
    ],
    annotations: [check],
  };
  return { file: writeChart(spec, outDir, "energy", format), checks: [check] };
}

export function plotSmoothing(runDir: string, outDir: string, format: Format): FigureResult {
  const table = parseTrajectoryCsv(join(runDir, "trajectory.csv"));
  const report = readReport(join(runDir, "report.json"));
  if (typeof report.c2 !== "number" || !report.fit_window) {
    throw new ArtifactError("report.json carries no smoothing fit");
  }
  const window: [number, number] = [report.fit_window[0], report.fit_window[1]];
  const refit = smoothingExponent(table.t, table.ut_Linf, window);
  const dev = Math.abs(refit.exponent - report.c2);
  if (dev > 1e-12) {
    throw new AssertionViolation(
      `refitted decay exponent ${refit.exponent} deviates from report c2 ` +
        `${report.c2} by ${dev.toExponential(2)} > 1e-12`,
    );
  }
  const check = `slope annotation consistent with report.json to ${dev.toExponential(1)}`;
  const ts: number[] = [];
  const ys: number[] = [];
  for (let i = 1; i < table.t.length; i++) {
    const ut = table.ut_Linf[i];
    if (table.t[i] > 0 && ut > 0) {
      ts.push(table.t[i]);
      ys.push(ut * ut);
    }
  }
  // overlay of the fitted power law c1 t^{-c2} through the window center
  const mid = Math.sqrt(window[0] * window[1]);
  const midIdx = ts.reduce(
    (best, v, i) => (Math.abs(v - mid) < Math.abs(ts[best] - mid) ? i : best),
    0,
  );
  const c1 = ys[midIdx] * Math.pow(ts[midIdx], report.c2);
  const fitY = ts.map((tv) => c1 * Math.pow(tv, -(report.c2 as number)));
  const spec: ChartSpec = {
    title: "velocity smoothing (log-log)",
    xlabel: "t",
    ylabel: "|u_t|_inf^2",
    xlog: true,
    ylog: true,
    series: [
      { x: ts, y: ys, color: "#1f77b4", label: "data" },
      { x: ts, y: fitY, color: "#d62728", label: `slope -${report.c2.toFixed(3)}`, dashed: true },
    ],
    annotations: [check],
  };
  return { file: writeChart(spec, outDir, "smoothing", format), checks: [check] };
}

export function plotContraction(runDir: string, outDir: string, format: Format): FigureResult {
  const report = readReport(join(runDir, "report.json"));
  const series = report.series;
  if (!series || !Array.isArray(series.times)) {
    throw new ArtifactError("report.json carries no contraction series");
  }
  const checks: string[] = [];
  let annotation = "decay of the trajectory difference";
  if (typeof report.ell === "number" && typeof report.spectral_rate === "number") {
    const rate = decayRate(series.times, series.diff_v, [report.ell, 2 * report.ell]);
    const rel = Math.abs(rate - report.spectral_rate) / report.spectral_rate;
    if (rel > 0.05) {
      throw new AssertionViolation(
        `refitted decay rate ${rate.toFixed(4)} deviates from the spectral ` +
          `value ${report.spectral_rate.toFixed(4)} by ${(rel * 100).toFixed(1)}% > 5%`,
      );
    }
    annotation = `rate ${rate.toFixed(3)} vs spectral ${report.spectral_rate.toFixed(3)} (${(rel * 100).toFixed(2)}%)`;
    checks.push(annotation);
  }
  const spec: ChartSpec = {
    title: "pairwise contraction",
    xlabel: "t",
    ylabel: "|u_a - u_b|_H1",
    ylog: true,
    series: [{ x: series.times, y: series.diff_v, color: "#1f77b4", label: "difference" }],
    annotations: [annotation],
  };
  return { file: writeChart(spec, outDir, "contraction", format), checks };
}

export function ladderTable(runDir: string, outDir: string): FigureResult {
  const report = readReport(join(runDir, "report.json"));
  if (!Array.isArray(report.p) || !Array.isArray(report.window_norms)) {
    throw new ArtifactError("report.json carries no ladder data");
  }
  if (report.p.length !== report.window_norms.length) {
    throw new AssertionViolation("ladder table rows disagree with the exponent count");
  }
  const lines = ["  j        p_j    sup-window Lp norm of u_t"];
  for (let j = 0; j < report.p.length; j++) {
    lines.push(
      `${String(j + 1).padStart(3)} ${report.p[j].toFixed(6).padStart(10)} ` +
        `${report.window_norms[j].toExponential(6).padStart(16)}`,
    );
  }
  if (typeof report.sup_linf === "number") {
    lines.push(`sup-norm reference: ${report.sup_linf.toExponential(6)}`);
  }
  mkdirSync(outDir, { recursive: true });
  const file = join(outDir, "ladder.txt");
  writeFileSync(file, lines.join("\n") + "\n", "utf-8");
  return { file, checks: [`${report.p.length} ladder rows`] };
}
