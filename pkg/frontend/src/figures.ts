/**
 * Figure assembly: turns parsed CSV rows into labeled curve sets.
 *
 * Five kinds are supported, mirroring the benchmark suite's figures:
 * DoA and fingerprint RMSE versus SNR (with a dashed bound overlay),
 * per-trial convergence traces, and the two imbalance-scaling sweeps.
 */

import { parseSweepCsv, parseTraceCsv, SchemaError, SweepRow } from "./csv.js";

export const FIGURE_KINDS = [
  "rmse_doa",
  "rmse_rff",
  "convergence",
  "amp_sweep",
  "phase_sweep",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface Point {
  x: number;
  y: number;
}

export interface Curve {
  label: string;
  points: Point[];
  dashed: boolean;
}

export interface FigureData {
  title: string;
  xLabel: string;
  yLabel: string;
  logY: boolean;
  curves: Curve[];
}

const BOUND_LABEL = "CRLB";

// ---------------------------------------------------------------------------
// Sweep figures
// ---------------------------------------------------------------------------

function sortedMethods(rows: SweepRow[]): string[] {
  const seen: string[] = [];
  for (const row of rows) {
    if (row.method !== BOUND_LABEL && !seen.includes(row.method)) {
      seen.push(row.method);
    }
  }
  return seen.sort();
}

function methodCurve(
  rows: SweepRow[],
  method: string,
  pick: (row: SweepRow) => number | null,
): Curve {
  const points = rows
    .filter((r) => r.method === method)
    .map((r) => ({ x: r.sweepValue, y: pick(r) }))
    .filter((p): p is Point => p.y !== null)
    .sort((a, b) => a.x - b.x);
  return { label: method, points, dashed: false };
}

/** One bound point per sweep value; the column repeats across methods. */
function boundCurve(
  rows: SweepRow[],
  pick: (row: SweepRow) => number | null,
): Curve | null {
  const byX = new Map<number, number>();
  for (const row of rows) {
    const v = pick(row);
    if (v !== null && !byX.has(row.sweepValue)) {
      byX.set(row.sweepValue, v);
    }
  }
  if (byX.size === 0) return null;
  const points = [...byX.entries()]
    .map(([x, y]) => ({ x, y }))
    .sort((a, b) => a.x - b.x);
  return { label: BOUND_LABEL, points, dashed: true };
}

function sweepFigure(
  csvText: string,
  opts: {
    title: string;
    xLabel: string;
    yLabel: string;
    pick: (row: SweepRow) => number | null;
    bound: (row: SweepRow) => number | null;
  },
): FigureData {
  const rows = parseSweepCsv(csvText);
  const methods = sortedMethods(rows);
  if (methods.length === 0) {
    throw new SchemaError("no method rows to plot");
  }
  const curves = methods
    .map((m) => methodCurve(rows, m, opts.pick))
    .filter((c) => c.points.length > 0);
  if (curves.length === 0) {
    throw new SchemaError("no finite values to plot");
  }
  const bound = boundCurve(rows, opts.bound);
  if (bound !== null) curves.push(bound);
  return {
    title: opts.title,
    xLabel: opts.xLabel,
    yLabel: opts.yLabel,
    logY: true,
    curves,
  };
}

// ---------------------------------------------------------------------------
// Convergence figure
// ---------------------------------------------------------------------------

function convergenceFigure(csvText: string): FigureData {
  const rows = parseTraceCsv(csvText);
  if (rows.length === 0) {
    throw new SchemaError("no trace rows to plot");
  }
  const byTrial = new Map<string, Point[]>();
  for (const row of rows) {
    const key = `${row.snrDb} dB, trial ${row.trial}`;
    if (!byTrial.has(key)) byTrial.set(key, []);
    byTrial.get(key)!.push({ x: row.iteration, y: row.loss });
  }
  const curves: Curve[] = [...byTrial.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([label, points]) => ({
      label,
      points: points.sort((a, b) => a.x - b.x),
      dashed: false,
    }));
  return {
    title: "Reconstruction loss per iteration",
    xLabel: "Iteration",
    yLabel: "Loss",
    logY: true,
    curves,
  };
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

export function buildFigure(kind: FigureKind, csvText: string): FigureData {
  switch (kind) {
    case "rmse_doa":
      return sweepFigure(csvText, {
        title: "DoA estimation error versus SNR",
        xLabel: "SNR (dB)",
        yLabel: "RMSE (degrees)",
        pick: (r) => r.rmseThetaDeg,
        bound: (r) => r.crlbSqrtThetaDeg,
      });
    case "rmse_rff":
      return sweepFigure(csvText, {
        title: "Fingerprint estimation error versus SNR",
        xLabel: "SNR (dB)",
        yLabel: "RMSE",
        pick: (r) => r.rmseZ,
        bound: (r) => r.crlbSqrtZ,
      });
    case "amp_sweep":
      return sweepFigure(csvText, {
        title: "Fingerprint error versus amplitude-imbalance scaling",
        xLabel: "Amplitude scaling factor",
        yLabel: "RMSE",
        pick: (r) => r.rmseZ,
        bound: (r) => r.crlbSqrtZ,
      });
    case "phase_sweep":
      return sweepFigure(csvText, {
        title: "Fingerprint error versus phase-imbalance scaling",
        xLabel: "Phase scaling factor",
        yLabel: "RMSE",
        pick: (r) => r.rmseZ,
        bound: (r) => r.crlbSqrtZ,
      });
    case "convergence":
      return convergenceFigure(csvText);
    default: {
      const exhaustive: never = kind;
      throw new SchemaError(`unknown figure kind: ${exhaustive}`);
    }
  }
}
