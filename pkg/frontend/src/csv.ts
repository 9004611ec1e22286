/**
 * CSV parsing for the benchmark result schemas.
 *
 * Two inputs exist: sweep files (one aggregate row per method and sweep
 * point) and convergence-trace files (one row per solver iteration).
 * Header validation is strict; a missing column is reported by name.
 */

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface SweepRow {
  method: string;
  sweepAxis: string;
  sweepValue: number;
  rmseThetaDeg: number | null;
  rmseZ: number | null;
  crlbSqrtThetaDeg: number | null;
  crlbSqrtZ: number | null;
  meanIters: number | null;
  failRate: number | null;
  trials: number;
  seed: number;
}

export const SWEEP_COLUMNS = [
  "method",
  "sweep_axis",
  "sweep_value",
  "rmse_theta_deg",
  "rmse_z",
  "crlb_sqrt_theta_deg",
  "crlb_sqrt_z",
  "mean_iters",
  "fail_rate",
  "trials",
  "seed",
] as const;

export interface TraceRow {
  snrDb: number;
  trial: number;
  iteration: number;
  loss: number;
  converged: boolean;
  seed: number;
}

export const TRACE_COLUMNS = [
  "snr_db",
  "trial",
  "iteration",
  "loss",
  "converged",
  "seed",
] as const;

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/** Splits the text into non-empty trimmed lines of comma-separated cells. */
function readTable(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

/** Maps required column names to their indices, or throws naming the gap. */
function columnIndex(
  header: string[],
  required: readonly string[],
): Map<string, number> {
  const index = new Map<string, number>();
  for (const name of required) {
    const at = header.indexOf(name);
    if (at < 0) {
      throw new SchemaError(`missing required column: ${name}`);
    }
    index.set(name, at);
  }
  return index;
}

function numberOrNull(cell: string | undefined): number | null {
  if (cell === undefined || cell === "") return null;
  const v = Number(cell);
  if (Number.isNaN(v)) {
    throw new SchemaError(`cannot parse number from ${JSON.stringify(cell)}`);
  }
  return v;
}

function numberStrict(cell: string | undefined, column: string): number {
  const v = numberOrNull(cell);
  if (v === null) {
    throw new SchemaError(`empty value in required column: ${column}`);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

export function parseSweepCsv(text: string): SweepRow[] {
  const table = readTable(text);
  if (table.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const idx = columnIndex(table[0], SWEEP_COLUMNS);
  const cell = (row: string[], name: string) => row[idx.get(name)!];
  return table.slice(1).map((row) => ({
    method: cell(row, "method"),
    sweepAxis: cell(row, "sweep_axis"),
    sweepValue: numberStrict(cell(row, "sweep_value"), "sweep_value"),
    rmseThetaDeg: numberOrNull(cell(row, "rmse_theta_deg")),
    rmseZ: numberOrNull(cell(row, "rmse_z")),
    crlbSqrtThetaDeg: numberOrNull(cell(row, "crlb_sqrt_theta_deg")),
    crlbSqrtZ: numberOrNull(cell(row, "crlb_sqrt_z")),
    meanIters: numberOrNull(cell(row, "mean_iters")),
    failRate: numberOrNull(cell(row, "fail_rate")),
    trials: numberStrict(cell(row, "trials"), "trials"),
    seed: numberStrict(cell(row, "seed"), "seed"),
  }));
}

export function parseTraceCsv(text: string): TraceRow[] {
  const table = readTable(text);
  if (table.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const idx = columnIndex(table[0], TRACE_COLUMNS);
  const cell = (row: string[], name: string) => row[idx.get(name)!];
  return table.slice(1).map((row) => ({
    snrDb: numberStrict(cell(row, "snr_db"), "snr_db"),
    trial: numberStrict(cell(row, "trial"), "trial"),
    iteration: numberStrict(cell(row, "iteration"), "iteration"),
    loss: numberStrict(cell(row, "loss"), "loss"),
    converged: numberStrict(cell(row, "converged"), "converged") !== 0,
    seed: numberStrict(cell(row, "seed"), "seed"),
  }));
}
