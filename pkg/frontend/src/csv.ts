/** Trajectory CSV parsing with strict schema validation. */

import { readFileSync } from "node:fs";

export const TRAJECTORY_COLUMNS = [
  "t",
  "E",
  "F",
  "G",
  "ut_Linf",
  "u_min",
  "u_max",
  "d2",
  "dinf",
  "newton_iters",
  "dissipation",
] as const;

export type TrajectoryColumn = (typeof TRAJECTORY_COLUMNS)[number];

export type TrajectoryTable = Record<TrajectoryColumn, number[]>;

export class ArtifactError extends Error {}

/** Parse trajectory.csv; the header must match the writer schema exactly. */
export function parseTrajectoryCsv(path: string): TrajectoryTable {
  let raw: string;
  try {
    raw = readFileSync(path, "utf-8");
  } catch {
    throw new ArtifactError(`cannot read ${path}`);
  }
  const lines = raw.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new ArtifactError(`${path} is empty`);
  }
  const expected = TRAJECTORY_COLUMNS.join(",");
  if (lines[0] !== expected) {
    throw new ArtifactError(
      `${path} has header '${lines[0]}', expected '${expected}'`,
    );
  }
  const table = Object.fromEntries(
    TRAJECTORY_COLUMNS.map((c) => [c, [] as number[]]),
  ) as TrajectoryTable;
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== TRAJECTORY_COLUMNS.length) {
      throw new ArtifactError(`${path}:${i + 1} has ${parts.length} fields`);
    }
    for (let j = 0; j < parts.length; j++) {
      const v = Number(parts[j]);
      if (Number.isNaN(v)) {
        throw new ArtifactError(`${path}:${i + 1} field '${parts[j]}' is not a number`);
      }
      table[TRAJECTORY_COLUMNS[j]].push(v);
    }
  }
  if (table.t.length === 0) {
    throw new ArtifactError(`${path} has no data rows`);
  }
  return table;
}

export interface RunReport {
  experiment?: string;
  dt?: number;
  c2?: number;
  fit_window?: [number, number];
  lyapunov?: { c_fit: number; violations: number };
  spectral_rate?: number | null;
  fitted_rate?: number | null;
  ell?: number;
  series?: { times: number[]; diff_v: number[] } | null;
  p?: number[];
  window_norms?: number[];
  sup_linf?: number;
  [key: string]: unknown;
}

export function readReport(path: string): RunReport {
  let raw: string;
  try {
    raw = readFileSync(path, "utf-8");
  } catch {
    throw new ArtifactError(`cannot read ${path}`);
  }
  try {
    return JSON.parse(raw) as RunReport;
  } catch {
    throw new ArtifactError(`${path} is not valid JSON`);
  }
}
