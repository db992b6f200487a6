// Minimal deterministic SVG scene builder: no DOM, no timestamps, fixed
// number formatting, so identical inputs give byte-identical files.

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 480,
  margin: { top: 40, right: 24, bottom: 56, left: 72 },
};

export const SERIES_COLORS = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#17becf", "#7f7f7f",
];

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  if (x === 0) return "0";
  const s = x.toPrecision(6);
  return s.includes(".") || s.includes("e")
    ? s.replace(/\.?0+($|e)/, "$1")
    : s;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Scale {
  (x: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const k = (range[1] - range[0]) / (d1 - d0);
  const f = ((x: number) => range[0] + (x - d0) * k) as Scale;
  f.domain = [d0, d1];
  return f;
}

export function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (lo === hi) return [lo];
  const span = hi - lo;
  const raw = span / Math.max(1, n);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  return [lo, hi];
}

export function padExtent([lo, hi]: [number, number], frac = 0.05): [number, number] {
  const pad = (hi - lo || 1) * frac;
  return [lo - pad, hi + pad];
}

export class Svg {
  private parts: string[] = [];

  constructor(public frame: Frame) {}

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.raw(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5): void {
    const body = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.raw(
      `<polyline points="${body}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${fmt(width)}"/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.raw(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.raw(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, s: string, opts: { anchor?: string; size?: number; rotate?: number } = {}): void {
    const anchor = opts.anchor ?? "middle";
    const size = opts.size ?? 12;
    const rot = opts.rotate
      ? ` transform="rotate(${fmt(opts.rotate)} ${fmt(x)} ${fmt(y)})"`
      : "";
    this.raw(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="Helvetica,Arial,sans-serif" ` +
        `font-size="${fmt(size)}" text-anchor="${anchor}"${rot}>${escapeXml(s)}</text>`,
    );
  }

  axes(xs: Scale, ys: Scale, xLabel: string, yLabel: string, title: string): void {
    const { width, height, margin } = this.frame;
    const x0 = margin.left;
    const x1 = width - margin.right;
    const y0 = height - margin.bottom;
    const y1 = margin.top;
    this.line(x0, y0, x1, y0, "#000");
    this.line(x0, y0, x0, y1, "#000");
    for (const t of niceTicks(xs.domain[0], xs.domain[1])) {
      const px = xs(t);
      this.line(px, y0, px, y0 + 5, "#000");
      this.text(px, y0 + 18, fmt(t), { size: 10 });
    }
    for (const t of niceTicks(ys.domain[0], ys.domain[1])) {
      const py = ys(t);
      this.line(x0 - 5, py, x0, py, "#000");
      this.text(x0 - 8, py + 3, fmt(t), { anchor: "end", size: 10 });
    }
    this.text((x0 + x1) / 2, height - 12, xLabel);
    this.text(16, (y0 + y1) / 2, yLabel, { rotate: -90 });
    if (title) this.text((x0 + x1) / 2, 22, title, { size: 14 });
  }

  legend(entries: Array<{ label: string; color: string }>): void {
    const { width, margin } = this.frame;
    let y = margin.top + 8;
    const x = width - margin.right - 150;
    for (const { label, color } of entries) {
      this.line(x, y - 4, x + 22, y - 4, color, 2);
      this.text(x + 28, y, label, { anchor: "start", size: 11 });
      y += 16;
    }
  }

  toString(): string {
    const { width, height } = this.frame;
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}">\n<rect width="${width}" height="${height}" fill="#ffffff"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

// compact blue->yellow colormap for residual heatmaps
const STOPS: Array<[number, [number, number, number]]> = [
  [0.0, [13, 8, 135]],
  [0.25, [126, 3, 168]],
  [0.5, [204, 71, 120]],
  [0.75, [248, 149, 64]],
  [1.0, [240, 249, 33]],
];

export function heatColor(t: number): string {
  const x = Math.min(1, Math.max(0, t));
  for (let i = 1; i < STOPS.length; i++) {
    if (x <= STOPS[i][0]) {
      const [t0, c0] = STOPS[i - 1];
      const [t1, c1] = STOPS[i];
      const w = (x - t0) / (t1 - t0);
      const rgb = c0.map((c, k) => Math.round(c + w * (c1[k] - c)));
      return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
    }
  }
  return "rgb(240,249,33)";
}
