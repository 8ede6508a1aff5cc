/**
 * Validate an emitted CSV against the consuming package's ingestion,
 * invoked through the python interpreter with warnings promoted to errors
 * ("accepted with zero warnings").
 */

import { spawnSync } from 'child_process';

export interface IngestionSummary {
  n: number;
  d: number;
  treated: number;
  has_ground_truth: boolean;
}

const SNIPPET = `
import json, sys
from stochint.data import load_csv
ds, gt = load_csv(sys.argv[1])
print(json.dumps({"n": ds.n, "d": ds.d, "treated": int(ds.t.sum()),
                  "has_ground_truth": gt is not None}))
`;

export function validateWithPrimary(csvFile: string, python = 'python3'): IngestionSummary {
  const run = spawnSync(python, ['-W', 'error', '-c', SNIPPET, csvFile], {
    encoding: 'utf8',
    timeout: 120_000,
  });
  if (run.error) {
    throw new Error(`could not launch ${python}: ${run.error.message}`);
  }
  if (run.status !== 0) {
    throw new Error(`primary ingestion rejected ${csvFile}:\n${run.stderr}`);
  }
  return JSON.parse(run.stdout.trim()) as IngestionSummary;
}
