/**
 * Convert the infant-development replication archives (train/test .npz
 * files with 100 simulations each) into per-replication CSVs.
 *
 * Expected archive members: x (units, covariates, reps), t, yf, mu0, mu1
 * all (units, reps); extra members (ycf, ate, ...) are ignored.  Each
 * replication r becomes rep_<r>.csv with columns x1..xd, t, y, mu0, mu1.
 *
 *   node dist/convert-ihdp.js --source-train train.npz --source-test test.npz \
 *        --out-dir data/ihdp
 */

import * as fs from 'fs';
import * as path from 'path';

import { parseArgs } from './args';
import { covariateNames, writeCsv } from './csv';
import { writeManifest } from './manifest';
import { at, NpyArray, readNpz, shapeOf } from './npz';

const REQUIRED = ['x', 't', 'yf', 'mu0', 'mu1'] as const;

interface Archive {
  x: NpyArray;
  t: NpyArray;
  yf: NpyArray;
  mu0: NpyArray;
  mu1: NpyArray;
}

function openArchive(file: string): Archive {
  const arrays = readNpz(fs.readFileSync(file));
  for (const key of REQUIRED) {
    if (!(key in arrays)) {
      throw new Error(`${file}: missing archive member '${key}'`);
    }
  }
  const x = arrays.x;
  if (x.shape.length !== 3) {
    throw new Error(`${file}: expected x with shape (units, covariates, reps), got ${shapeOf(x)}`);
  }
  const [units, , reps] = x.shape;
  for (const key of ['t', 'yf', 'mu0', 'mu1'] as const) {
    const arr = arrays[key];
    if (arr.shape.length !== 2 || arr.shape[0] !== units || arr.shape[1] !== reps) {
      throw new Error(
        `${file}: member ${key} has shape ${shapeOf(arr)}, expected (${units}, ${reps})`
      );
    }
  }
  return { x, t: arrays.t, yf: arrays.yf, mu0: arrays.mu0, mu1: arrays.mu1 };
}

export function convertIhdpArchive(file: string, outDir: string, split: string): number {
  const archive = openArchive(file);
  const [units, covariates, reps] = archive.x.shape;
  const header = [...covariateNames(covariates), 't', 'y', 'mu0', 'mu1'];
  for (let r = 0; r < reps; r++) {
    const rows: number[][] = [];
    for (let i = 0; i < units; i++) {
      const row: number[] = [];
      for (let j = 0; j < covariates; j++) row.push(at(archive.x, i, j, r));
      row.push(at(archive.t, i, r));
      row.push(at(archive.yf, i, r));
      row.push(at(archive.mu0, i, r));
      row.push(at(archive.mu1, i, r));
      rows.push(row);
    }
    const name = `rep_${String(r + 1).padStart(3, '0')}.csv`;
    writeCsv(path.join(outDir, split, name), header, rows);
  }
  return reps;
}

export function convertIhdp(sourceTrain: string, sourceTest: string, outDir: string): void {
  const trainReps = convertIhdpArchive(sourceTrain, outDir, 'train');
  const testReps = convertIhdpArchive(sourceTest, outDir, 'test');
  writeManifest(outDir, {
    dataset: 'ihdp',
    source: { train: sourceTrain, test: sourceTest },
    outputDir: outDir,
    replications: trainReps,
    columnMapping: {
      covariates: 'x[:, :, rep] -> x1..xd',
      t: 't[:, rep]',
      y: 'yf[:, rep] (factual outcome)',
      mu0: 'mu0[:, rep]',
      mu1: 'mu1[:, rep]',
    },
    notes: { testReplications: testReps },
  });
}

function main(): void {
  const args = parseArgs(process.argv.slice(2), {
    'source-train': 'value',
    'source-test': 'value',
    'out-dir': 'value',
  });
  const train = args['source-train'] as string;
  const test = args['source-test'] as string;
  const outDir = args['out-dir'] as string;
  if (!train || !test || !outDir) {
    console.error(
      'usage: convert-ihdp --source-train <npz> --source-test <npz> --out-dir <dir>'
    );
    process.exit(2);
  }
  convertIhdp(train, test, outDir);
  console.log(`wrote replication CSVs under ${outDir}/train and ${outDir}/test`);
}

if (require.main === module) {
  main();
}
