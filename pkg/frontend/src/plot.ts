import { readFileSync, writeFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { aggregate } from "./aggregate.js";
import { parseCsv, PlotError } from "./csv.js";
import { renderSvg } from "./svg.js";

/** Columns holding probabilities get a pinned [0, 1] axis. */
export function isUnitColumn(name: string): boolean {
  return /error|rate|tail|probability/i.test(name);
}

export function buildSvg(csvText: string, x: string, y: string, group: string): string {
  const table = parseCsv(csvText);
  const series = aggregate(table, x, y, group);
  return renderSvg(series, {
    xLabel: x,
    yLabel: y,
    logX: true,
    unitY: isUnitColumn(y),
  });
}

export function main(argv: string[]): number {
  const args = yargs(argv)
    .usage("plot --csv <in> --x <col> --y <col> --group <col> --out <svg>")
    .option("csv", { type: "string", demandOption: true, describe: "input CSV path" })
    .option("x", { type: "string", default: "m", describe: "x-axis column" })
    .option("y", { type: "string", default: "loss_gap", describe: "y-axis column" })
    .option("group", { type: "string", default: "estimator", describe: "one line per value" })
    .option("out", { type: "string", demandOption: true, describe: "output image path (.svg)" })
    .strict()
    .parseSync();

  if (!args.out.endsWith(".svg")) {
    process.stderr.write("only .svg output is supported (no raster backend); use --out <file>.svg\n");
    return 1;
  }
  let text: string;
  try {
    text = readFileSync(args.csv, "utf8");
  } catch (err) {
    process.stderr.write(`cannot read ${args.csv}: ${(err as Error).message}\n`);
    return 1;
  }
  try {
    writeFileSync(args.out, buildSvg(text, args.x, args.y, args.group));
  } catch (err) {
    if (err instanceof PlotError) {
      process.stderr.write(`${err.message}\n`);
      return 1;
    }
    throw err;
  }
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  process.exit(main(hideBin(process.argv)));
}
