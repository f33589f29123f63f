import Papa from "papaparse";

export class PlotError extends Error {}

export interface Table {
  columns: string[];
  rows: Record<string, string | number>[];
}

export function parseCsv(text: string): Table {
  const parsed = Papa.parse<Record<string, string | number>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new PlotError(`CSV parse error at row ${first.row}: ${first.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0) {
    throw new PlotError("CSV has no header row");
  }
  return { columns, rows: parsed.data };
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new PlotError(
        `column '${name}' not found in CSV header (${table.columns.join(", ")})`
      );
    }
  }
}

export function numericCell(row: Record<string, string | number>, column: string): number {
  const v = row[column];
  const num = typeof v === "number" ? v : Number(v);
  if (!Number.isFinite(num)) {
    throw new PlotError(`non-numeric value '${v}' in column '${column}'`);
  }
  return num;
}
