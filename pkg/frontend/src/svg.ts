/** Minimal SVG plotting helpers: linear scales, axes, line series. */

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo === hi) {
    return [lo];
  }
  const rawStep = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(Math.abs(rawStep))));
  const norm = rawStep / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * Math.abs(step); v += step) {
    ticks.push(Math.abs(v) < 1e-12 * Math.abs(step) ? 0 : v);
  }
  return ticks;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Number(v.toPrecision(6)));
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

export function padExtent([lo, hi]: [number, number], frac = 0.06): [number, number] {
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

export interface SeriesStyle {
  stroke: string;
  dash?: string;
  width?: number;
}

export function polylinePath(
  xs: number[],
  ys: number[],
  sx: Scale,
  sy: Scale,
): string {
  const parts: string[] = [];
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) {
      pen = false;
      continue;
    }
    const cmd = pen ? "L" : "M";
    parts.push(`${cmd}${sx(xs[i]).toFixed(2)},${sy(ys[i]).toFixed(2)}`);
    pen = true;
  }
  return parts.join("");
}

export interface PanelSeries {
  label: string;
  x: number[];
  y: number[];
  style: SeriesStyle;
}

export interface PanelRule {
  label: string;
  y: number;
  style: SeriesStyle;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: PanelSeries[];
  rules?: PanelRule[];
}

const PANEL_W = 420;
const PANEL_H = 300;
const MARGIN = { top: 34, right: 16, bottom: 42, left: 64 };

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderPanel(spec: PanelSpec, x0: number, y0: number): string {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series
    .flatMap((s) => s.y)
    .concat((spec.rules ?? []).map((r) => r.y));
  const sx = linScale(extent(xs), [0, innerW]);
  const sy = linScale(padExtent(extent(ys)), [innerH, 0]);

  const parts: string[] = [];
  parts.push(`<g class="panel" transform="translate(${x0 + MARGIN.left},${y0 + MARGIN.top})">`);
  parts.push(`<rect x="0" y="0" width="${innerW}" height="${innerH}" fill="white" stroke="#444" stroke-width="1"/>`);
  for (const tick of niceTicks(sx.domain[0], sx.domain[1])) {
    const px = sx(tick);
    parts.push(`<line x1="${px.toFixed(2)}" y1="0" x2="${px.toFixed(2)}" y2="${innerH}" stroke="#ddd" stroke-width="0.5"/>`);
    parts.push(`<text x="${px.toFixed(2)}" y="${innerH + 16}" font-size="10" text-anchor="middle">${fmtTick(tick)}</text>`);
  }
  for (const tick of niceTicks(sy.domain[0], sy.domain[1])) {
    const py = sy(tick);
    parts.push(`<line x1="0" y1="${py.toFixed(2)}" x2="${innerW}" y2="${py.toFixed(2)}" stroke="#ddd" stroke-width="0.5"/>`);
    parts.push(`<text x="-6" y="${(py + 3).toFixed(2)}" font-size="10" text-anchor="end">${fmtTick(tick)}</text>`);
  }
  for (const rule of spec.rules ?? []) {
    const py = sy(rule.y);
    parts.push(`<line x1="0" y1="${py.toFixed(2)}" x2="${innerW}" y2="${py.toFixed(2)}" stroke="${rule.style.stroke}" stroke-width="${rule.style.width ?? 1}" stroke-dasharray="${rule.style.dash ?? "6,2,1,2"}"/>`);
  }
  for (const s of spec.series) {
    const d = polylinePath(s.x, s.y, sx, sy);
    if (!d) continue;
    const dash = s.style.dash ? ` stroke-dasharray="${s.style.dash}"` : "";
    parts.push(`<path d="${d}" fill="none" stroke="${s.style.stroke}" stroke-width="${s.style.width ?? 1.4}"${dash}/>`);
  }
  parts.push(`<text x="${innerW / 2}" y="-12" font-size="12" text-anchor="middle" font-weight="bold">${esc(spec.title)}</text>`);
  parts.push(`<text x="${innerW / 2}" y="${innerH + 32}" font-size="11" text-anchor="middle">${esc(spec.xLabel)}</text>`);
  parts.push(`<text transform="translate(${-MARGIN.left + 14},${innerH / 2}) rotate(-90)" font-size="11" text-anchor="middle">${esc(spec.yLabel)}</text>`);
  let ly = 6;
  for (const s of spec.series) {
    const dash = s.style.dash ? ` stroke-dasharray="${s.style.dash}"` : "";
    parts.push(`<line x1="${innerW - 104}" y1="${ly}" x2="${innerW - 84}" y2="${ly}" stroke="${s.style.stroke}" stroke-width="1.6"${dash}/>`);
    parts.push(`<text x="${innerW - 80}" y="${ly + 3}" font-size="9">${esc(s.label)}</text>`);
    ly += 12;
  }
  parts.push("</g>");
  return parts.join("\n");
}

export function svgDocument(panels: string[], cols: number, rows: number): string {
  const width = cols * PANEL_W;
  const height = rows * PANEL_H;
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...panels,
    "</svg>",
  ].join("\n");
}

export const PANEL_SIZE = { width: PANEL_W, height: PANEL_H };
