/**
 * Convert the job-training study text files (treated + control, whitespace
 * separated) into two CSV variants, one per earnings year.
 *
 * Source row layout: treat age education black hispanic married nodegree
 * re75 re78.  Covariates are the six demographic fields; the outcome is
 * either 1975 or 1978 earnings.
 *
 *   node dist/convert-lalonde.js --source-treated nsw_treated.txt \
 *        --source-control nsw_control.txt --out-dir data/lalonde
 */

import * as fs from 'fs';
import * as path from 'path';

import { parseArgs } from './args';
import { writeCsv } from './csv';
import { writeManifest } from './manifest';

const COLUMNS = [
  'treat', 'age', 'education', 'black', 'hispanic', 'married', 'nodegree',
  're75', 're78',
] as const;

const COVARIATES = ['age', 'education', 'black', 'hispanic', 'married', 'nodegree'];

function readRows(file: string): number[][] {
  const text = fs.readFileSync(file, 'utf8');
  const rows: number[][] = [];
  for (const [lineNo, line] of text.split(/\r?\n/).entries()) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    const fields = trimmed.split(/\s+/).map(Number);
    if (fields.length !== COLUMNS.length || fields.some((v) => !Number.isFinite(v))) {
      throw new Error(
        `${file}:${lineNo + 1}: expected ${COLUMNS.length} numeric fields, got '${trimmed}'`
      );
    }
    rows.push(fields);
  }
  return rows;
}

export function convertLalonde(
  sourceTreated: string,
  sourceControl: string,
  outDir: string,
): { rows: number; treated: number } {
  const rows = [...readRows(sourceTreated), ...readRows(sourceControl)];
  const header = [...COVARIATES, 't', 'y'];
  for (const [suffix, column] of [['re75', 7], ['re78', 8]] as const) {
    const out = rows.map((r) => [r[1], r[2], r[3], r[4], r[5], r[6], r[0], r[column]]);
    writeCsv(path.join(outDir, `lalonde_${suffix}.csv`), header, out);
  }
  const treated = rows.filter((r) => r[0] === 1).length;
  writeManifest(outDir, {
    dataset: 'lalonde',
    source: { treated: sourceTreated, control: sourceControl },
    outputDir: outDir,
    replications: 1,
    columnMapping: {
      covariates: COVARIATES,
      t: 'treat',
      y: 're75 (lalonde_re75.csv) / re78 (lalonde_re78.csv)',
    },
    notes: { rows: rows.length, treated },
  });
  return { rows: rows.length, treated };
}

function main(): void {
  const args = parseArgs(process.argv.slice(2), {
    'source-treated': 'value',
    'source-control': 'value',
    'out-dir': 'value',
  });
  const treatedFile = args['source-treated'] as string;
  const controlFile = args['source-control'] as string;
  const outDir = args['out-dir'] as string;
  if (!treatedFile || !controlFile || !outDir) {
    console.error(
      'usage: convert-lalonde --source-treated <txt> --source-control <txt> --out-dir <dir>'
    );
    process.exit(2);
  }
  const { rows, treated } = convertLalonde(treatedFile, controlFile, outDir);
  console.log(`wrote ${rows} rows (${treated} treated) as two outcome variants under ${outDir}`);
}

if (require.main === module) {
  main();
}
