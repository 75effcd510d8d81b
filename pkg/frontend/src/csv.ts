/**
 * Reader for the capiset CLI's CSV artifacts: an optional `# {json}` header
 * comment, one header row, numeric cells (string columns allowed).
 */

import { readFileSync } from "fs";

export class FigureError extends Error {}

export interface Table {
  header: Record<string, unknown> | null;
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  let header: Record<string, unknown> | null = null;
  const body: string[] = [];
  for (const raw of text.split("\n")) {
    const line = raw.trimEnd();
    if (!line) continue;
    if (line.startsWith("#")) {
      header = JSON.parse(line.slice(1).trim());
    } else {
      body.push(line);
    }
  }
  if (body.length === 0) {
    throw new FigureError("CSV has no header row");
  }
  const columns = body[0].split(",");
  const rows = body.slice(1).map((ln) => ln.split(","));
  return { header, columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

/** Numeric column by name; throws a named error when absent or empty. */
export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new FigureError(`missing column ${name}`);
  }
  if (table.rows.length === 0) {
    throw new FigureError(`column ${name} has no data rows`);
  }
  return table.rows.map((r) => {
    const v = Number(r[idx]);
    if (Number.isNaN(v)) {
      throw new FigureError(`column ${name} has a non-numeric cell`);
    }
    return v;
  });
}

export function columnsStartingWith(table: Table, prefix: string): string[] {
  return table.columns.filter((c) => c.startsWith(prefix));
}
