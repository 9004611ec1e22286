/**
 * Deterministic SVG line-chart rendering.
 *
 * Pure string assembly: the same FigureData always yields byte-identical
 * output. Only a generic sans-serif font family is referenced, so no font
 * files influence the result.
 */

import { Curve, FigureData } from "./figures.js";

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 48, right: 24, bottom: 56, left: 72 };
const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;

const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
];
const BOUND_COLOR = "#333333";

// ---------------------------------------------------------------------------
// Scales and ticks
// ---------------------------------------------------------------------------

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Fixed-precision coordinate formatting keeps the output stable. */
function fmt(v: number): string {
  return v.toFixed(2).replace(/^-0\.00$/, "0.00");
}

function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) {
    return v.toExponential(0).replace("+", "");
  }
  const rounded = Number(v.toPrecision(6));
  return String(rounded);
}

function linearTicks(min: number, max: number, count: number): number[] {
  if (min === max) return [min];
  const span = max - min;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const nice = mult * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / nice) * nice; v <= max + nice / 1e6; v += nice) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function logTicks(min: number, max: number): number[] {
  const ticks: number[] = [];
  const lo = Math.floor(Math.log10(min));
  const hi = Math.ceil(Math.log10(max));
  for (let d = lo; d <= hi; d += 1) {
    const v = Math.pow(10, d);
    if (v >= min / 1.0000001 && v <= max * 1.0000001) ticks.push(v);
  }
  return ticks.length >= 2 ? ticks : [min, max];
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

interface Extent {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

function dataExtent(curves: Curve[], logY: boolean): Extent {
  const xs = curves.flatMap((c) => c.points.map((p) => p.x));
  const ys = curves
    .flatMap((c) => c.points.map((p) => p.y))
    .filter((y) => !logY || y > 0);
  if (xs.length === 0 || ys.length === 0) {
    throw new Error("nothing to render: no plottable points");
  }
  return {
    xMin: Math.min(...xs),
    xMax: Math.max(...xs),
    yMin: Math.min(...ys),
    yMax: Math.max(...ys),
  };
}

export function renderSvg(data: FigureData): string {
  const ext = dataExtent(data.curves, data.logY);
  if (ext.xMin === ext.xMax) {
    ext.xMin -= 0.5;
    ext.xMax += 0.5;
  }
  const yLo = data.logY ? Math.log10(ext.yMin) : ext.yMin;
  const yHi = data.logY ? Math.log10(ext.yMax) : ext.yMax;
  const yPad = yHi === yLo ? 0.5 : 0.05 * (yHi - yLo);

  const sx = (x: number) =>
    MARGIN.left + ((x - ext.xMin) / (ext.xMax - ext.xMin)) * PLOT_W;
  const sy = (y: number) => {
    const t = data.logY ? Math.log10(y) : y;
    return (
      MARGIN.top +
      PLOT_H -
      ((t - (yLo - yPad)) / (yHi + yPad - (yLo - yPad))) * PLOT_H
    );
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `font-family="sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="26" text-anchor="middle" font-size="16">` +
      `${esc(data.title)}</text>`,
  );

  // grid and axes
  const xTicks = linearTicks(ext.xMin, ext.xMax, 7);
  const yTicks = data.logY
    ? logTicks(ext.yMin, ext.yMax)
    : linearTicks(ext.yMin, ext.yMax, 6);
  for (const t of xTicks) {
    const x = fmt(sx(t));
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" ` +
        `y2="${MARGIN.top + PLOT_H}" stroke="#dddddd"/>`,
    );
    parts.push(
      `<text x="${x}" y="${MARGIN.top + PLOT_H + 18}" text-anchor="middle" ` +
        `font-size="11">${fmtTick(t)}</text>`,
    );
  }
  for (const t of yTicks) {
    const y = fmt(sy(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" ` +
        `x2="${MARGIN.left + PLOT_W}" y2="${y}" stroke="#dddddd"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${y}" text-anchor="end" ` +
        `dominant-baseline="middle" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${PLOT_W}" ` +
      `height="${PLOT_H}" fill="none" stroke="#333333"/>`,
  );
  parts.push(
    `<text x="${MARGIN.left + PLOT_W / 2}" y="${HEIGHT - 14}" ` +
      `text-anchor="middle" font-size="13">${esc(data.xLabel)}</text>`,
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + PLOT_H / 2}" text-anchor="middle" ` +
      `font-size="13" transform="rotate(-90 20 ${MARGIN.top + PLOT_H / 2})">` +
      `${esc(data.yLabel)}</text>`,
  );

  // curves
  let colorAt = 0;
  const legend: { label: string; color: string; dashed: boolean }[] = [];
  for (const curve of data.curves) {
    const color = curve.dashed ? BOUND_COLOR : PALETTE[colorAt++ % PALETTE.length];
    const pts = curve.points
      .filter((p) => !data.logY || p.y > 0)
      .map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`)
      .join(" ");
    const dash = curve.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" ` +
        `stroke-width="1.6"${dash}/>`,
    );
    legend.push({ label: curve.label, color, dashed: curve.dashed });
  }

  // legend (skip when it would dwarf the plot, e.g. many traces)
  if (legend.length <= 8) {
    const lx = MARGIN.left + 12;
    let ly = MARGIN.top + 16;
    for (const item of legend) {
      const dash = item.dashed ? ' stroke-dasharray="6,4"' : "";
      parts.push(
        `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" ` +
          `stroke="${item.color}" stroke-width="1.6"${dash}/>`,
      );
      parts.push(
        `<text x="${lx + 32}" y="${ly}" font-size="12">${esc(item.label)}</text>`,
      );
      ly += 18;
    }
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
