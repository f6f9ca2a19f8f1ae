/** Deterministic SVG painters: no DOM, no fonts to embed, no randomness.
 *
 * Output depends only on the input arrays; numbers are written through one
 * fixed 6-significant-digit formatter so reruns are byte-identical.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  dashed: boolean;
}

export interface LinePanel {
  title: string;
  series: Series[];
  xLabel: string;
  yLabel: string;
}

export interface HeatPanel {
  title: string;
  times: number[];
  xs: number[];
  rows: number[][];
  xLabel: string;
  yLabel: string;
}

export const PANEL_W = 320;
export const PANEL_H = 240;
const MARGIN = { top: 34, right: 14, bottom: 40, left: 56 };
const PLOT_W = PANEL_W - MARGIN.left - MARGIN.right;
const PLOT_H = PANEL_H - MARGIN.top - MARGIN.bottom;

export function fmt(v: number): string {
  if (v === 0) return "0";
  if (!Number.isFinite(v)) throw new Error(`cannot plot non-finite value ${v}`);
  return String(Number(v.toPrecision(6)));
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) throw new Error("empty series");
  if (lo === hi) {
    // flat data still needs a nonzero span to map through
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function scale(lo: number, hi: number, rangeLo: number, rangeHi: number) {
  const k = (rangeHi - rangeLo) / (hi - lo);
  return (v: number) => rangeLo + (v - lo) * k;
}

function ticks(lo: number, hi: number, n: number): number[] {
  const out: number[] = [];
  for (let i = 0; i < n; i++) out.push(lo + ((hi - lo) * i) / (n - 1));
  return out;
}

function axes(sx: (v: number) => number, sy: (v: number) => number,
              xlo: number, xhi: number, ylo: number, yhi: number,
              xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${PLOT_W}" height="${PLOT_H}" fill="none" stroke="#444" stroke-width="1"/>`);
  for (const t of ticks(xlo, xhi, 5)) {
    const px = fmt(sx(t));
    parts.push(`<line x1="${px}" y1="${MARGIN.top + PLOT_H}" x2="${px}" y2="${MARGIN.top + PLOT_H + 4}" stroke="#444"/>`);
    parts.push(`<text x="${px}" y="${MARGIN.top + PLOT_H + 16}" font-size="9" text-anchor="middle" fill="#222">${fmt(t)}</text>`);
  }
  for (const t of ticks(ylo, yhi, 5)) {
    const py = fmt(sy(t));
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#444"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${py}" font-size="9" text-anchor="end" dominant-baseline="middle" fill="#222">${fmt(t)}</text>`);
  }
  parts.push(`<text x="${MARGIN.left + PLOT_W / 2}" y="${PANEL_H - 8}" font-size="10" text-anchor="middle" fill="#222">${xLabel}</text>`);
  parts.push(`<text x="14" y="${MARGIN.top + PLOT_H / 2}" font-size="10" text-anchor="middle" fill="#222" transform="rotate(-90 14 ${MARGIN.top + PLOT_H / 2})">${yLabel}</text>`);
  return parts.join("\n");
}

export function renderLinePanel(panel: LinePanel): string {
  const allX = panel.series.flatMap((s) => s.x);
  const allY = panel.series.flatMap((s) => s.y);
  const [xlo, xhi] = extent(allX);
  let [ylo, yhi] = extent(allY);
  const pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  const sx = scale(xlo, xhi, MARGIN.left, MARGIN.left + PLOT_W);
  const sy = scale(ylo, yhi, MARGIN.top + PLOT_H, MARGIN.top);
  const parts: string[] = [];
  parts.push(`<text x="${PANEL_W / 2}" y="16" font-size="11" text-anchor="middle" fill="#000">${panel.title}</text>`);
  parts.push(axes(sx, sy, xlo, xhi, ylo, yhi, panel.xLabel, panel.yLabel));
  for (const s of panel.series) {
    const pts: string[] = [];
    for (let i = 0; i < s.x.length; i++) pts.push(`${fmt(sx(s.x[i]))},${fmt(sy(s.y[i]))}`);
    const dash = s.dashed ? ` stroke-dasharray="6,4"` : "";
    parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="#000" stroke-width="1.4"${dash}/>`);
  }
  return parts.join("\n");
}

/** Symmetric blue-white-red map for signed fields. */
function divergingColor(v: number, vmax: number): string {
  const u = vmax > 0 ? Math.max(-1, Math.min(1, v / vmax)) : 0;
  const c = Math.round(255 * (1 - Math.abs(u)));
  return u >= 0 ? `rgb(255,${c},${c})` : `rgb(${c},${c},255)`;
}

export function renderHeatPanel(panel: HeatPanel): string {
  const nT = panel.times.length;
  const nX = panel.xs.length;
  let vmax = 0;
  for (const row of panel.rows) {
    for (const v of row) vmax = Math.max(vmax, Math.abs(v));
  }
  const parts: string[] = [];
  parts.push(`<text x="${PANEL_W / 2}" y="16" font-size="11" text-anchor="middle" fill="#000">${panel.title} (|max| = ${fmt(vmax)})</text>`);
  const cw = PLOT_W / nX;
  const ch = PLOT_H / nT;
  for (let k = 0; k < nT; k++) {
    // time increases upward, matching the y axis orientation
    const y = MARGIN.top + PLOT_H - (k + 1) * ch;
    for (let i = 0; i < nX; i++) {
      const xpx = MARGIN.left + i * cw;
      parts.push(`<rect x="${fmt(xpx)}" y="${fmt(y)}" width="${fmt(cw + 0.5)}" height="${fmt(ch + 0.5)}" fill="${divergingColor(panel.rows[k][i], vmax)}"/>`);
    }
  }
  const [tlo, thi] = extent(panel.times);
  const [xlo, xhi] = extent(panel.xs);
  const sx = scale(xlo, xhi, MARGIN.left, MARGIN.left + PLOT_W);
  const sy = scale(tlo, thi, MARGIN.top + PLOT_H, MARGIN.top);
  parts.push(axes(sx, sy, xlo, xhi, tlo, thi, panel.xLabel, panel.yLabel));
  return parts.join("\n");
}

export interface Legend {
  entries: { label: string; dashed: boolean }[];
}

/** Lay panels out on a fixed grid; each panel lands in <g class="panel">. */
export function composeFigure(panels: string[], columns: number, legend?: Legend): string {
  const rows = Math.ceil(panels.length / columns);
  const legendH = legend ? 24 : 0;
  const width = columns * PANEL_W;
  const height = rows * PANEL_H + legendH;
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">`);
  parts.push(`<rect x="0" y="0" width="${width}" height="${height}" fill="#fff"/>`);
  if (legend) {
    let lx = 16;
    for (const e of legend.entries) {
      const dash = e.dashed ? ` stroke-dasharray="6,4"` : "";
      parts.push(`<line x1="${lx}" y1="12" x2="${lx + 28}" y2="12" stroke="#000" stroke-width="1.4"${dash}/>`);
      parts.push(`<text x="${lx + 34}" y="15" font-size="10" fill="#000">${e.label}</text>`);
      lx += 34 + 10 * e.label.length + 24;
    }
  }
  panels.forEach((p, i) => {
    const tx = (i % columns) * PANEL_W;
    const ty = legendH + Math.floor(i / columns) * PANEL_H;
    parts.push(`<g class="panel" transform="translate(${tx},${ty})">`);
    parts.push(p);
    parts.push(`</g>`);
  });
  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
