/** Backend-independent chart layout: an x-y chart is reduced to a list of
 * drawing primitives (lines, polylines, text) in pixel coordinates, which
 * the SVG and PNG backends serialize or rasterize. */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label?: string;
  dashed?: boolean;
}

export interface ChartSpec {
  title: string;
  xlabel: string;
  ylabel: string;
  xlog?: boolean;
  ylog?: boolean;
  series: Series[];
  annotations?: string[];
  width?: number;
  height?: number;
}

export type Primitive =
  | { kind: "polyline"; points: [number, number][]; color: string; dashed?: boolean }
  | { kind: "line"; x0: number; y0: number; x1: number; y1: number; color: string }
  | { kind: "text"; x: number; y: number; text: string; color: string; size: number };

export interface RenderedChart {
  width: number;
  height: number;
  primitives: Primitive[];
}

const MARGIN = { left: 72, right: 16, top: 28, bottom: 44 };
const AXIS_COLOR = "#333333";

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) {
    const pad = Math.max(Math.abs(lo), 1.0) * 0.5;
    lo -= pad;
    hi += pad;
  }
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  let step = mag;
  for (const m of [1, 2, 2.5, 5, 10]) {
    if (mag * m >= step0) {
      step = mag * m;
      break;
    }
  }
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const k0 = Math.ceil(Math.log10(lo) - 1e-9);
  const k1 = Math.floor(Math.log10(hi) + 1e-9);
  for (let k = k0; k <= k1; k++) ticks.push(Math.pow(10, k));
  if (ticks.length === 0) ticks.push(lo, hi);
  return ticks;
}

export function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(0).replace("e+", "e").replace("e-0", "e-");
  }
  const s = v.toPrecision(3);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}

export function layoutChart(spec: ChartSpec): RenderedChart {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xsAll: number[] = [];
  const ysAll: number[] = [];
  for (const s of spec.series) {
    for (let i = 0; i < s.x.length; i++) {
      const xv = s.x[i];
      const yv = s.y[i];
      if (spec.xlog && !(xv > 0)) continue;
      if (spec.ylog && !(yv > 0)) continue;
      xsAll.push(xv);
      ysAll.push(yv);
    }
  }
  if (xsAll.length === 0) {
    xsAll.push(spec.xlog ? 1 : 0, spec.xlog ? 10 : 1);
    ysAll.push(spec.ylog ? 1 : 0, spec.ylog ? 10 : 1);
  }
  let xLo = Math.min(...xsAll);
  let xHi = Math.max(...xsAll);
  let yLo = Math.min(...ysAll);
  let yHi = Math.max(...ysAll);
  if (spec.xlog) {
    if (xLo === xHi) {
      xLo /= 2;
      xHi *= 2;
    }
  } else if (xLo === xHi) {
    const pad = Math.max(Math.abs(xLo), 1) * 0.5;
    xLo -= pad;
    xHi += pad;
  }
  if (spec.ylog) {
    if (yLo === yHi) {
      yLo /= 2;
      yHi *= 2;
    }
  } else {
    const pad = (yHi - yLo || Math.max(Math.abs(yLo), 1)) * 0.06;
    yLo -= pad;
    yHi += pad;
  }

  const tx = (v: number) => {
    const f = spec.xlog
      ? (Math.log10(v) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo))
      : (v - xLo) / (xHi - xLo);
    return MARGIN.left + f * plotW;
  };
  const ty = (v: number) => {
    const f = spec.ylog
      ? (Math.log10(v) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))
      : (v - yLo) / (yHi - yLo);
    return MARGIN.top + (1 - f) * plotH;
  };

  const prims: Primitive[] = [];
  // frame
  const x0 = MARGIN.left;
  const y0 = MARGIN.top;
  const x1 = width - MARGIN.right;
  const y1 = height - MARGIN.bottom;
  prims.push({ kind: "line", x0, y0: y1, x1, y1, color: AXIS_COLOR });
  prims.push({ kind: "line", x0, y0, x1: x0, y1, color: AXIS_COLOR });

  const xticks = spec.xlog ? logTicks(xLo, xHi) : niceTicks(xLo, xHi);
  for (const v of xticks) {
    if (v < xLo - 1e-12 || v > xHi * (spec.xlog ? 1.0000001 : 1) + 1e-12) continue;
    const px = tx(v);
    prims.push({ kind: "line", x0: px, y0: y1, x1: px, y1: y1 + 4, color: AXIS_COLOR });
    prims.push({
      kind: "text",
      x: px - 3 * formatTick(v).length,
      y: y1 + 16,
      text: formatTick(v),
      color: AXIS_COLOR,
      size: 10,
    });
  }
  const yticks = spec.ylog ? logTicks(yLo, yHi) : niceTicks(yLo, yHi);
  for (const v of yticks) {
    if (v < yLo - 1e-12 || v > yHi + 1e-12) continue;
    const py = ty(v);
    prims.push({ kind: "line", x0: x0 - 4, y0: py, x1: x0, y1: py, color: AXIS_COLOR });
    const label = formatTick(v);
    prims.push({
      kind: "text",
      x: x0 - 8 - 6 * label.length,
      y: py + 3,
      text: label,
      color: AXIS_COLOR,
      size: 10,
    });
  }

  prims.push({
    kind: "text",
    x: MARGIN.left,
    y: 16,
    text: spec.title,
    color: "#000000",
    size: 12,
  });
  prims.push({
    kind: "text",
    x: (x0 + x1) / 2 - 3 * spec.xlabel.length,
    y: height - 10,
    text: spec.xlabel,
    color: AXIS_COLOR,
    size: 10,
  });
  prims.push({
    kind: "text",
    x: 8,
    y: MARGIN.top - 8,
    text: spec.ylabel,
    color: AXIS_COLOR,
    size: 10,
  });

  let legendY = y0 + 12;
  for (const s of spec.series) {
    const pts: [number, number][] = [];
    for (let i = 0; i < s.x.length; i++) {
      const xv = s.x[i];
      const yv = s.y[i];
      if (spec.xlog && !(xv > 0)) continue;
      if (spec.ylog && !(yv > 0)) continue;
      pts.push([tx(xv), ty(yv)]);
    }
    if (pts.length === 1) {
      // degenerate single-point series: draw a small cross
      const [[px, py]] = pts;
      prims.push({ kind: "line", x0: px - 3, y0: py, x1: px + 3, y1: py, color: s.color });
      prims.push({ kind: "line", x0: px, y0: py - 3, x1: px, y1: py + 3, color: s.color });
    } else if (pts.length > 1) {
      prims.push({ kind: "polyline", points: pts, color: s.color, dashed: s.dashed });
    }
    if (s.label) {
      prims.push({
        kind: "line",
        x0: x1 - 150,
        y0: legendY - 3,
        x1: x1 - 130,
        y1: legendY - 3,
        color: s.color,
      });
      prims.push({
        kind: "text",
        x: x1 - 124,
        y: legendY,
        text: s.label,
        color: AXIS_COLOR,
        size: 10,
      });
      legendY += 14;
    }
  }
  for (const [i, note] of (spec.annotations ?? []).entries()) {
    prims.push({
      kind: "text",
      x: x0 + 10,
      y: y1 - 10 - 14 * i,
      text: note,
      color: "#555555",
      size: 10,
    });
  }
  return { width, height, primitives: prims };
}
