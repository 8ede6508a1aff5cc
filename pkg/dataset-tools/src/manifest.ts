/** Conversion provenance written alongside every batch of outputs. */

import * as fs from 'fs';
import * as path from 'path';

export interface ConversionManifest {
  dataset: string;
  source: string | Record<string, string>;
  outputDir: string;
  replications: number;
  columnMapping: Record<string, string | string[]>;
  notes?: Record<string, unknown>;
}

export function writeManifest(outDir: string, manifest: ConversionManifest): string {
  fs.mkdirSync(outDir, { recursive: true });
  const file = path.join(outDir, 'manifest.json');
  fs.writeFileSync(file, JSON.stringify(manifest, null, 2) + '\n', 'utf8');
  return file;
}
