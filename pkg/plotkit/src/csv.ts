/** Minimal CSV reading for the run-directory schemas (no quoting, no escapes). */

import { readFileSync } from 'fs';

export interface Table {
  header: string[];
  rows: string[][];
}

export class MissingColumnError extends Error {
  constructor(public readonly column: string, public readonly file: string) {
    super(`column "${column}" not found in ${file}`);
  }
}

export class EmptyTableError extends Error {
  constructor(public readonly file: string) {
    super(`${file} has a header but no data rows`);
  }
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    return { header: [], rows: [] };
  }
  const header = lines[0].split(',');
  const rows = lines.slice(1).map((line) => line.split(','));
  return { header, rows };
}

export function readTable(path: string): Table {
  return parseCsv(readFileSync(path, 'utf8'));
}

/** Numeric column accessor; throws a named error when the column is absent. */
export function numericColumn(table: Table, name: string, file: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new MissingColumnError(name, file);
  }
  return table.rows.map((row) => Number(row[idx]));
}

export function requireRows(table: Table, file: string): void {
  if (table.rows.length === 0) {
    throw new EmptyTableError(file);
  }
}
