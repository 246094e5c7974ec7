/**
 * Parser for the ekp diagnostics CSV: lines starting with "#" are comments
 * (the first one carries the run timestamp), the first data line is the
 * header row, every later line is a numeric record.
 */

export interface CsvTable {
  columns: string[];
  rows: number[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): CsvTable {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0 && !l.startsWith("#"));
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(`row ${i} has ${parts.length} fields, expected ${columns.length}`);
    }
    rows.push(parts.map(Number));
  }
  return { columns, rows };
}

/** Column by name; throws a SchemaError naming the missing column. */
export function column(table: CsvTable, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column: ${name}`);
  }
  return table.rows.map((r) => r[idx]);
}

export function extrema(values: number[]): { min: number; max: number } {
  if (values.length === 0) {
    throw new SchemaError("no data rows");
  }
  let min = values[0];
  let max = values[0];
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  return { min, max };
}
