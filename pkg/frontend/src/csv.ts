import { readFileSync } from "node:fs";

export class SchemaError extends Error {}

export interface Table {
  file: string;
  columns: string[];
  rows: number[][];
}

export function parseCsvText(text: string, file = "<memory>"): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${file}: empty CSV (no header row)`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  if (columns.some((c) => c.length === 0)) {
    throw new SchemaError(`${file}: blank column name in header`);
  }
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(
        `${file}: row ${i + 1} has ${parts.length} fields, expected ${columns.length}`,
      );
    }
    const row = parts.map((p) => Number(p));
    const bad = row.findIndex((v) => !Number.isFinite(v));
    if (bad >= 0) {
      throw new SchemaError(
        `${file}: row ${i + 1}, column "${columns[bad]}" is not numeric: "${parts[bad]}"`,
      );
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new SchemaError(`${file}: no data rows`);
  }
  return { file, columns, rows };
}

export function readCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`${path}: ${(err as Error).message}`);
  }
  return parseCsvText(text, path);
}

export function requireColumns(table: Table, required: string[]): void {
  const missing = required.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${table.file}: missing column(s) ${missing.join(", ")}; ` +
        `found ${table.columns.join(", ")}`,
    );
  }
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${table.file}: no column "${name}"`);
  }
  return table.rows.map((r) => r[idx]);
}

export function hasColumn(table: Table, name: string): boolean {
  return table.columns.includes(name);
}
