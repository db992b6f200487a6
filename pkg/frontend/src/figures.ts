import { basename } from "node:path";

import {
  SchemaError,
  Table,
  column,
  hasColumn,
  requireColumns,
} from "./csv.js";
import {
  DEFAULT_FRAME,
  SERIES_COLORS,
  Svg,
  extent,
  fmt,
  heatColor,
  linearScale,
  padExtent,
} from "./svg.js";

export type FigureKind = "overlay" | "convergence" | "residual";

export interface FigureJob {
  kind: FigureKind;
  inputs: Table[];
  reference?: Table;
  title?: string;
}

function plotScales(svg: Svg, xs: [number, number], ys: [number, number]) {
  const { width, height, margin } = svg.frame;
  return {
    x: linearScale(xs, [margin.left, width - margin.right]),
    y: linearScale(ys, [height - margin.bottom, margin.top]),
  };
}

function referenceCurve(ref: Table): Array<[number, number]> {
  // accepts the pde CSV (r,tau,value) or the hitting CSV (r,tau,cdf)
  const ycol = hasColumn(ref, "value")
    ? "value"
    : hasColumn(ref, "cdf")
      ? "cdf"
      : null;
  if (!ycol || !hasColumn(ref, "r")) {
    throw new SchemaError(
      `${ref.file}: reference needs columns r,value or r,cdf; ` +
        `found ${ref.columns.join(", ")}`,
    );
  }
  const xs = column(ref, "r");
  const yvals = column(ref, ycol);
  return xs.map((x, i) => [x, yvals[i]] as [number, number]);
}

export function overlayFigure(job: FigureJob): string {
  const svg = new Svg(DEFAULT_FRAME);
  const allX: number[] = [];
  const allY: number[] = [];
  const series: Array<{
    label: string;
    color: string;
    pts: Array<[number, number, number]>;
  }> = [];
  job.inputs.forEach((t, i) => {
    requireColumns(t, ["bin_mid_chi", "mean", "stderr", "n"]);
    const xs = column(t, "bin_mid_chi");
    const ms = column(t, "mean");
    const es = column(t, "stderr");
    allX.push(...xs);
    allY.push(...ms.map((m, k) => m + es[k]), ...ms.map((m, k) => m - es[k]));
    series.push({
      label: basename(t.file),
      color: SERIES_COLORS[i % SERIES_COLORS.length],
      pts: xs.map((x, k) => [x, ms[k], es[k]] as [number, number, number]),
    });
  });

  let curve: Array<[number, number]> | null = null;
  if (job.reference) {
    curve = referenceCurve(job.reference);
  } else if (hasColumn(job.inputs[0], "phi")) {
    const xs = column(job.inputs[0], "bin_mid_chi");
    const phi = column(job.inputs[0], "phi");
    curve = xs.map((x, i) => [x, phi[i]] as [number, number]);
  }
  if (curve) {
    allX.push(...curve.map((p) => p[0]));
    allY.push(...curve.map((p) => p[1]));
  }

  const { x, y } = plotScales(svg, padExtent(extent(allX)), padExtent(extent(allY)));
  svg.axes(x, y, "chi = r / sqrt(L)", "density", job.title ?? "density vs reference");
  if (curve) {
    svg.polyline(curve.map(([a, b]) => [x(a), y(b)]), "#000000", 1.5);
  }
  for (const s of series) {
    for (const [px, py, pe] of s.pts) {
      if (pe > 0) {
        svg.line(x(px), y(py - pe), x(px), y(py + pe), s.color, 1);
      }
      svg.circle(x(px), y(py), 2.5, s.color);
    }
  }
  const legend = series.map((s) => ({ label: s.label, color: s.color }));
  if (curve) legend.push({ label: "reference", color: "#000000" });
  svg.legend(legend);
  return svg.toString();
}

export function convergenceFigure(job: FigureJob): string {
  const svg = new Svg(DEFAULT_FRAME);
  const allX: number[] = [];
  const allY: number[] = [];
  const series: Array<{
    label: string;
    color: string;
    pts: Array<[number, number]>;
  }> = [];
  job.inputs.forEach((t, i) => {
    requireColumns(t, ["bin_mid_chi"]);
    const xs = column(t, "bin_mid_chi");
    let gaps: number[];
    if (hasColumn(t, "gap")) {
      gaps = column(t, "gap").map(Math.abs);
    } else if (hasColumn(t, "phi") && hasColumn(t, "mean")) {
      const ms = column(t, "mean");
      const ps = column(t, "phi");
      gaps = ms.map((m, k) => Math.abs(m - ps[k]));
    } else {
      throw new SchemaError(
        `${t.file}: convergence input needs a gap column or mean+phi; ` +
          `found ${t.columns.join(", ")}`,
      );
    }
    allX.push(...xs);
    allY.push(...gaps);
    series.push({
      label: basename(t.file),
      color: SERIES_COLORS[i % SERIES_COLORS.length],
      pts: xs.map((v, k) => [v, gaps[k]] as [number, number]),
    });
  });
  const { x, y } = plotScales(
    svg,
    padExtent(extent(allX)),
    padExtent([0, extent(allY)[1]]),
  );
  svg.axes(x, y, "chi = r / sqrt(L)", "|density - phi|",
    job.title ?? "convergence in L");
  for (const s of series) {
    svg.polyline(s.pts.map(([a, b]) => [x(a), y(b)]), s.color, 1.5);
  }
  svg.legend(series.map((s) => ({ label: s.label, color: s.color })));
  return svg.toString();
}

export function residualFigure(job: FigureJob): string {
  const t = job.inputs[0];
  requireColumns(t, ["r", "tau", "residual"]);
  const rs = column(t, "r");
  const taus = column(t, "tau");
  const res = column(t, "residual");
  const uniq = (v: number[]) => [...new Set(v)].sort((a, b) => a - b);
  const rVals = uniq(rs);
  const tVals = uniq(taus);
  const lookup = new Map<string, number>();
  rs.forEach((r, i) => lookup.set(`${r}|${taus[i]}`, res[i]));
  const vmax = Math.max(...res, 1e-300);

  const svg = new Svg(DEFAULT_FRAME);
  const { width, height, margin } = svg.frame;
  const x = linearScale([0, rVals.length], [margin.left, width - margin.right - 40]);
  const y = linearScale([0, tVals.length], [height - margin.bottom, margin.top]);
  for (let i = 0; i < rVals.length; i++) {
    for (let j = 0; j < tVals.length; j++) {
      const v = lookup.get(`${rVals[i]}|${tVals[j]}`);
      if (v === undefined) continue;
      svg.rect(x(i), y(j + 1), x(i + 1) - x(i), y(j) - y(j + 1),
        heatColor(v / vmax));
    }
  }
  // frame and tick labels on cell centers
  for (let i = 0; i < rVals.length; i++) {
    svg.text(x(i + 0.5), height - margin.bottom + 16, fmt(rVals[i]), { size: 9 });
  }
  for (let j = 0; j < tVals.length; j++) {
    svg.text(margin.left - 8, y(j + 0.5) + 3, fmt(tVals[j]),
      { anchor: "end", size: 9 });
  }
  svg.text((margin.left + width - margin.right) / 2, height - 12, "r");
  svg.text(16, (margin.top + height - margin.bottom) / 2, "tau", { rotate: -90 });
  svg.text((margin.left + width - margin.right) / 2, 22,
    job.title ?? `pde residual (max ${fmt(vmax)})`, { size: 14 });
  // colorbar
  const cbX = width - margin.right - 24;
  const steps = 40;
  const cbTop = margin.top;
  const cbH = height - margin.top - margin.bottom;
  for (let k = 0; k < steps; k++) {
    svg.rect(cbX, cbTop + ((steps - 1 - k) * cbH) / steps, 14, cbH / steps + 0.5,
      heatColor((k + 0.5) / steps));
  }
  svg.text(cbX + 7, cbTop - 6, fmt(vmax), { size: 9 });
  svg.text(cbX + 7, cbTop + cbH + 12, "0", { size: 9 });
  return svg.toString();
}

export function renderFigure(job: FigureJob): string {
  if (job.inputs.length === 0) {
    throw new SchemaError("no input CSVs given");
  }
  switch (job.kind) {
    case "overlay":
      return overlayFigure(job);
    case "convergence":
      return convergenceFigure(job);
    case "residual":
      return residualFigure(job);
    default:
      throw new SchemaError(`unknown figure kind "${job.kind}"`);
  }
}
