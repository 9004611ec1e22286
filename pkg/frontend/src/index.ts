export {
  SchemaError,
  SweepRow,
  TraceRow,
  parseSweepCsv,
  parseTraceCsv,
  SWEEP_COLUMNS,
  TRACE_COLUMNS,
} from "./csv.js";
export {
  FIGURE_KINDS,
  FigureKind,
  FigureData,
  Curve,
  Point,
  buildFigure,
} from "./figures.js";
export { renderSvg } from "./svg.js";
export { runCli } from "./cli.js";
