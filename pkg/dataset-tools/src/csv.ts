/**
 * Canonical CSV emission: UTF-8, comma separators, one header row, decimal
 * points, no thousands separators.  Numbers use the shortest exact
 * JavaScript double representation, so files are byte-stable for a fixed
 * source and round-trip exactly.
 */

import * as fs from 'fs';
import * as path from 'path';

export function formatNumber(v: number): string {
  if (!Number.isFinite(v)) {
    throw new Error(`refusing to write non-finite value ${v}`);
  }
  return String(v);
}

export function writeCsv(file: string, header: string[], rows: number[][]): void {
  const lines = [header.join(',')];
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(`row width ${row.length} does not match header width ${header.length}`);
    }
    lines.push(row.map(formatNumber).join(','));
  }
  fs.mkdirSync(path.dirname(file), { recursive: true });
  fs.writeFileSync(file, lines.join('\n') + '\n', 'utf8');
}

export function covariateNames(count: number): string[] {
  return Array.from({ length: count }, (_, j) => `x${j + 1}`);
}
