/** Fixture builders: enough npy/zip writing to fabricate benchmark archives. */

import * as fs from 'fs';
import * as path from 'path';

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

/** Serialize a float64 C-order array as npy format 1.0. */
export function writeNpy(data: Float64Array | number[], shape: number[]): Buffer {
  const values = data instanceof Float64Array ? data : Float64Array.from(data);
  const count = shape.reduce((a, b) => a * b, 1);
  if (values.length !== count) {
    throw new Error(`data length ${values.length} does not match shape (${shape})`);
  }
  const shapeText = shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(', ')})`;
  let header = `{'descr': '<f8', 'fortran_order': False, 'shape': ${shapeText}, }`;
  const unpadded = 10 + header.length + 1;
  header += ' '.repeat((64 - (unpadded % 64)) % 64) + '\n';
  const head = Buffer.alloc(10 + header.length);
  head[0] = 0x93;
  head.write('NUMPY', 1, 'ascii');
  head[6] = 1;
  head[7] = 0;
  head.writeUInt16LE(header.length, 8);
  head.write(header, 10, 'latin1');
  const body = Buffer.alloc(values.length * 8);
  for (let i = 0; i < values.length; i++) body.writeDoubleLE(values[i], i * 8);
  return Buffer.concat([head, body]);
}

/** Assemble a zip archive with stored (uncompressed) members. */
export function writeZip(members: Record<string, Buffer>): Buffer {
  const chunks: Buffer[] = [];
  const central: Buffer[] = [];
  let offset = 0;
  for (const [name, body] of Object.entries(members)) {
    const nameBuf = Buffer.from(name, 'utf8');
    const crc = crc32(body);
    const local = Buffer.alloc(30);
    local.writeUInt32LE(0x04034b50, 0);
    local.writeUInt16LE(20, 4); // version needed
    local.writeUInt16LE(0, 8); // stored
    local.writeUInt32LE(crc, 14);
    local.writeUInt32LE(body.length, 18);
    local.writeUInt32LE(body.length, 22);
    local.writeUInt16LE(nameBuf.length, 26);
    chunks.push(local, nameBuf, body);

    const dir = Buffer.alloc(46);
    dir.writeUInt32LE(0x02014b50, 0);
    dir.writeUInt16LE(20, 6); // version needed
    dir.writeUInt16LE(0, 10); // stored
    dir.writeUInt32LE(crc, 16);
    dir.writeUInt32LE(body.length, 20);
    dir.writeUInt32LE(body.length, 24);
    dir.writeUInt16LE(nameBuf.length, 28);
    dir.writeUInt32LE(offset, 42);
    central.push(Buffer.concat([dir, nameBuf]));
    offset += local.length + nameBuf.length + body.length;
  }
  const directory = Buffer.concat(central);
  const eocd = Buffer.alloc(22);
  eocd.writeUInt32LE(0x06054b50, 0);
  eocd.writeUInt16LE(central.length, 8);
  eocd.writeUInt16LE(central.length, 10);
  eocd.writeUInt32LE(directory.length, 12);
  eocd.writeUInt32LE(offset, 16);
  return Buffer.concat([...chunks, directory, eocd]);
}

/** Deterministic uniform numbers (no seeding dance with Math.random). */
export function* lcg(seed: number): Generator<number> {
  let state = seed >>> 0;
  while (true) {
    state = (1664525 * state + 1013904223) >>> 0;
    yield state / 2 ** 32;
  }
}

export interface ReplicationArchiveSpec {
  units: number;
  covariates: number;
  replications: number;
  treatedPerRep: number;
  seed: number;
}

/** Fabricate a replication archive shaped like the public benchmark npz. */
export function buildReplicationArchive(spec: ReplicationArchiveSpec): Buffer {
  const { units, covariates, replications, treatedPerRep, seed } = spec;
  const rand = lcg(seed);
  const next = () => rand.next().value as number;
  const x = new Float64Array(units * covariates * replications);
  for (let i = 0; i < x.length; i++) x[i] = next() * 2 - 1;
  const t = new Float64Array(units * replications);
  const yf = new Float64Array(units * replications);
  const ycf = new Float64Array(units * replications);
  const mu0 = new Float64Array(units * replications);
  const mu1 = new Float64Array(units * replications);
  for (let r = 0; r < replications; r++) {
    for (let i = 0; i < units; i++) {
      const flat = i * replications + r;
      const treated = i < treatedPerRep ? 1 : 0; // exact arm counts per replication
      t[flat] = treated;
      mu0[flat] = next() * 3;
      mu1[flat] = mu0[flat] + 4 + next();
      const noise = (next() - 0.5) * 0.2;
      yf[flat] = (treated ? mu1[flat] : mu0[flat]) + noise;
      ycf[flat] = (treated ? mu0[flat] : mu1[flat]) + noise;
    }
  }
  return writeZip({
    'x.npy': writeNpy(x, [units, covariates, replications]),
    't.npy': writeNpy(t, [units, replications]),
    'yf.npy': writeNpy(yf, [units, replications]),
    'ycf.npy': writeNpy(ycf, [units, replications]),
    'mu0.npy': writeNpy(mu0, [units, replications]),
    'mu1.npy': writeNpy(mu1, [units, replications]),
  });
}

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(require('os').tmpdir(), prefix));
}
