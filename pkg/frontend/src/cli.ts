#!/usr/bin/env node
/**
 * CLI: plot --kind <kind> --in <csv> --out <svg>
 *
 * Reads a benchmark result CSV and writes one SVG figure. Nothing is
 * written when parsing or validation fails.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { SchemaError } from "./csv.js";
import { buildFigure, FIGURE_KINDS, FigureKind } from "./figures.js";
import { renderSvg } from "./svg.js";

export function runCli(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        kind: { type: "string" },
        in: { type: "string" },
        out: { type: "string" },
      },
      strict: true,
    });
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  const { kind, in: input, out } = parsed.values;
  if (!kind || !input || !out) {
    console.error("usage: plot --kind <kind> --in <csv> --out <svg>");
    console.error(`kinds: ${FIGURE_KINDS.join(", ")}`);
    return 2;
  }
  if (!(FIGURE_KINDS as readonly string[]).includes(kind)) {
    console.error(
      `error: unknown kind ${JSON.stringify(kind)}; ` +
        `expected one of ${FIGURE_KINDS.join(", ")}`,
    );
    return 2;
  }

  let svg: string;
  try {
    const csvText = readFileSync(input, "utf-8");
    svg = renderSvg(buildFigure(kind as FigureKind, csvText));
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error(`error: ${(err as Error).message}`);
    }
    return 1;
  }
  writeFileSync(out, svg);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(runCli(process.argv.slice(2)));
}
