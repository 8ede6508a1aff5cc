/**
 * Convert the online-promotion pricing CSV into the canonical schema.
 *
 * The source carries customer covariates, a price/discount column and a
 * revenue column.  The binary treatment is "a nonzero discount was
 * applied": rows whose price lies strictly below the baseline (the maximum
 * distinct price in the file) are treated.  The rule and baseline are
 * recorded in the manifest.
 *
 *   node dist/convert-op.js --source pricing_sample.csv --out-dir data/op
 */

import * as fs from 'fs';
import * as path from 'path';

import { parseArgs } from './args';
import { writeCsv } from './csv';
import { writeManifest } from './manifest';

export interface OpOptions {
  treatmentCol?: string;
  outcomeCol?: string;
}

function splitCsvLine(line: string): string[] {
  return line.split(',').map((s) => s.trim());
}

export function convertOp(
  source: string,
  outDir: string,
  options: OpOptions = {},
): { rows: number; covariates: number; treated: number; baseline: number } {
  const treatmentCol = options.treatmentCol ?? 'price';
  const outcomeCol = options.outcomeCol ?? 'demand';
  const lines = fs.readFileSync(source, 'utf8').split(/\r?\n/).filter((l) => l.trim());
  if (lines.length < 2) {
    throw new Error(`${source}: no data rows`);
  }
  const header = splitCsvLine(lines[0]);
  const priceIdx = header.indexOf(treatmentCol);
  const outcomeIdx = header.indexOf(outcomeCol);
  if (priceIdx < 0) throw new Error(`${source}: no '${treatmentCol}' column`);
  if (outcomeIdx < 0) throw new Error(`${source}: no '${outcomeCol}' column`);
  const covariateIdx = header
    .map((_, i) => i)
    .filter((i) => i !== priceIdx && i !== outcomeIdx);

  const parsed: number[][] = [];
  for (const [lineNo, line] of lines.slice(1).entries()) {
    const fields = splitCsvLine(line).map(Number);
    if (fields.length !== header.length || fields.some((v) => !Number.isFinite(v))) {
      throw new Error(`${source}:${lineNo + 2}: bad numeric row '${line}'`);
    }
    parsed.push(fields);
  }

  const baseline = Math.max(...parsed.map((r) => r[priceIdx]));
  const rows = parsed.map((r) => [
    ...covariateIdx.map((i) => r[i]),
    r[priceIdx] < baseline ? 1 : 0,
    r[outcomeIdx],
  ]);
  const outHeader = [...covariateIdx.map((i) => header[i]), 't', 'y'];
  writeCsv(path.join(outDir, 'op.csv'), outHeader, rows);

  const treated = rows.filter((r) => r[r.length - 2] === 1).length;
  writeManifest(outDir, {
    dataset: 'op',
    source,
    outputDir: outDir,
    replications: 1,
    columnMapping: {
      covariates: covariateIdx.map((i) => header[i]),
      t: `1 if ${treatmentCol} < ${baseline} (nonzero discount) else 0`,
      y: outcomeCol,
    },
    notes: { rows: rows.length, treated, baselinePrice: baseline },
  });
  return { rows: rows.length, covariates: covariateIdx.length, treated, baseline };
}

function main(): void {
  const args = parseArgs(process.argv.slice(2), {
    source: 'value',
    'out-dir': 'value',
    'treatment-col': 'value',
    'outcome-col': 'value',
  });
  const source = args.source as string;
  const outDir = args['out-dir'] as string;
  if (!source || !outDir) {
    console.error('usage: convert-op --source <csv> --out-dir <dir> '
      + '[--treatment-col price] [--outcome-col demand]');
    process.exit(2);
  }
  const result = convertOp(source, outDir, {
    treatmentCol: args['treatment-col'] as string | undefined,
    outcomeCol: args['outcome-col'] as string | undefined,
  });
  console.log(
    `wrote ${result.rows} rows, ${result.covariates} covariates `
    + `(${result.treated} treated) to ${outDir}/op.csv`
  );
}

if (require.main === module) {
  main();
}
