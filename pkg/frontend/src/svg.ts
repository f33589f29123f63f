import { Series } from "./aggregate.js";

const WIDTH = 760;
const HEIGHT = 480;
const MARGIN = { top: 32, right: 170, bottom: 58, left: 78 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export interface RenderOptions {
  xLabel: string;
  yLabel: string;
  logX: boolean;
  /** Pin the y axis to [0, 1] (probability-style columns). */
  unitY: boolean;
}

function fmt(v: number): string {
  return v.toFixed(2);
}

function tickLabel(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 1000 || abs < 0.01) return v.toExponential(1);
  return String(Number(v.toPrecision(4)));
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (hi <= lo) return [lo];
  const rawStep = (hi - lo) / n;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 2.5, 5, 10].map((c) => c * mag);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += step) ticks.push(Number(v.toPrecision(12)));
  return ticks;
}

/** Render aggregated series into a complete standalone SVG document. */
export function renderSvg(series: Series[], opts: RenderOptions): string {
  const allPoints = series.flatMap((s) => s.points);
  if (allPoints.length === 0) {
    throw new Error("nothing to plot: no data points after aggregation");
  }
  const xs = allPoints.map((p) => p.x);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  let yLo = opts.unitY ? 0 : Math.min(0, ...allPoints.map((p) => p.q1));
  let yHi = opts.unitY ? 1 : Math.max(...allPoints.map((p) => p.q3));
  if (yHi <= yLo) yHi = yLo + 1;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;

  const xPos = (v: number): number => {
    if (opts.logX && xLo > 0 && xHi > xLo) {
      return MARGIN.left + (plotW * (Math.log10(v) - Math.log10(xLo))) / (Math.log10(xHi) - Math.log10(xLo));
    }
    if (xHi === xLo) return MARGIN.left + plotW / 2;
    return MARGIN.left + (plotW * (v - xLo)) / (xHi - xLo);
  };
  const yPos = (v: number): number => MARGIN.top + plotH * (1 - (v - yLo) / (yHi - yLo));

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  // frame
  const x0 = MARGIN.left;
  const x1 = MARGIN.left + plotW;
  const y0 = MARGIN.top + plotH;
  const y1 = MARGIN.top;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);

  // x ticks at the distinct data positions
  const xTicks = [...new Set(xs)].sort((a, b) => a - b);
  for (const v of xTicks) {
    const px = xPos(v);
    parts.push(`<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${y0 + 20}" text-anchor="middle" font-size="12">${tickLabel(v)}</text>`
    );
  }
  for (const v of niceTicks(yLo, yHi)) {
    const py = yPos(v);
    parts.push(`<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${fmt(py + 4)}" text-anchor="end" font-size="12">${tickLabel(v)}</text>`
    );
  }

  // axis labels
  parts.push(
    `<text class="x-label" x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="14">${opts.xLabel}</text>`
  );
  parts.push(
    `<text class="y-label" x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">${opts.yLabel}</text>`
  );

  // one band + line + markers per group
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.points;
    if (pts.length > 1) {
      const upper = pts.map((p) => `${fmt(xPos(p.x))},${fmt(yPos(p.q3))}`);
      const lower = [...pts].reverse().map((p) => `${fmt(xPos(p.x))},${fmt(yPos(p.q1))}`);
      parts.push(
        `<path class="band" fill="${color}" fill-opacity="0.15" stroke="none" d="M ${upper.join(" L ")} L ${lower.join(" L ")} Z"/>`
      );
      const line = pts.map((p) => `${fmt(xPos(p.x))},${fmt(yPos(p.median))}`);
      parts.push(
        `<path class="line" fill="none" stroke="${color}" stroke-width="2" d="M ${line.join(" L ")}"/>`
      );
    } else {
      // a single point still gets a visible (degenerate) line element
      const p = pts[0];
      parts.push(
        `<path class="line" fill="none" stroke="${color}" stroke-width="2" d="M ${fmt(xPos(p.x))},${fmt(yPos(p.median))} L ${fmt(xPos(p.x))},${fmt(yPos(p.median))}"/>`
      );
    }
    for (const p of pts) {
      parts.push(
        `<circle class="marker" cx="${fmt(xPos(p.x))}" cy="${fmt(yPos(p.median))}" r="3" fill="${color}"/>`
      );
    }
  });

  // legend
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const ly = MARGIN.top + 12 + i * 20;
    const lx = MARGIN.left + plotW + 14;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${color}" stroke-width="2"/>`);
    parts.push(
      `<text class="legend" x="${lx + 28}" y="${ly + 4}" font-size="13">${s.group}</text>`
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
