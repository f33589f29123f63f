import { numericCell, requireColumns, Table } from "./csv.js";

/** Median and interquartile band of the y column at each x, per group. */
export interface SeriesPoint {
  x: number;
  median: number;
  q1: number;
  q3: number;
  count: number;
}

export interface Series {
  group: string;
  points: SeriesPoint[]; // sorted by x ascending
}

/** Linear-interpolation percentile on a sorted copy (the numpy default rule). */
export function percentile(values: number[], p: number): number {
  if (values.length === 0) {
    throw new Error("percentile of empty set");
  }
  const sorted = [...values].sort((a, b) => a - b);
  const pos = (sorted.length - 1) * p;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  if (lo === hi) return sorted[lo];
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

export function aggregate(table: Table, x: string, y: string, group: string): Series[] {
  requireColumns(table, [x, y, group]);
  const byGroup = new Map<string, Map<number, number[]>>();
  for (const row of table.rows) {
    const g = String(row[group]);
    const xv = numericCell(row, x);
    const yv = numericCell(row, y);
    let perX = byGroup.get(g);
    if (!perX) {
      perX = new Map();
      byGroup.set(g, perX);
    }
    const bucket = perX.get(xv);
    if (bucket) {
      bucket.push(yv);
    } else {
      perX.set(xv, [yv]);
    }
  }
  const series: Series[] = [];
  for (const g of [...byGroup.keys()].sort()) {
    const perX = byGroup.get(g)!;
    const points = [...perX.keys()]
      .sort((a, b) => a - b)
      .map((xv) => {
        const ys = perX.get(xv)!;
        return {
          x: xv,
          median: percentile(ys, 0.5),
          q1: percentile(ys, 0.25),
          q3: percentile(ys, 0.75),
          count: ys.length,
        };
      });
    series.push({ group: g, points });
  }
  return series;
}
