/**
 * Minimal .npz/.npy reader built on node's zlib: enough to unpack numeric
 * benchmark archives without external dependencies.  Supports stored and
 * deflated zip members, npy format versions 1.x/2.x, little-endian float,
 * integer and bool dtypes, and C or Fortran element order.
 */

import { inflateRawSync } from 'zlib';

export interface NpyArray {
  data: Float64Array;
  shape: number[];
  fortranOrder: boolean;
}

const EOCD_SIGNATURE = 0x06054b50;
const CENTRAL_SIGNATURE = 0x02014b50;
const LOCAL_SIGNATURE = 0x04034b50;

interface ZipEntry {
  name: string;
  compression: number;
  compressedSize: number;
  localOffset: number;
}

function findEocd(buf: Buffer): number {
  // EOCD is at the end, possibly followed by a zip comment (<= 64k)
  const lo = Math.max(0, buf.length - 65557);
  for (let i = buf.length - 22; i >= lo; i--) {
    if (buf.readUInt32LE(i) === EOCD_SIGNATURE) return i;
  }
  throw new Error('not a zip archive: end-of-central-directory not found');
}

function readZipEntries(buf: Buffer): ZipEntry[] {
  const eocd = findEocd(buf);
  const count = buf.readUInt16LE(eocd + 10);
  let offset = buf.readUInt32LE(eocd + 16);
  const entries: ZipEntry[] = [];
  for (let i = 0; i < count; i++) {
    if (buf.readUInt32LE(offset) !== CENTRAL_SIGNATURE) {
      throw new Error(`corrupt central directory at offset ${offset}`);
    }
    const compression = buf.readUInt16LE(offset + 10);
    const compressedSize = buf.readUInt32LE(offset + 20);
    const nameLength = buf.readUInt16LE(offset + 28);
    const extraLength = buf.readUInt16LE(offset + 30);
    const commentLength = buf.readUInt16LE(offset + 32);
    const localOffset = buf.readUInt32LE(offset + 42);
    const name = buf.toString('utf8', offset + 46, offset + 46 + nameLength);
    entries.push({ name, compression, compressedSize, localOffset });
    offset += 46 + nameLength + extraLength + commentLength;
  }
  return entries;
}

function extractEntry(buf: Buffer, entry: ZipEntry): Buffer {
  const at = entry.localOffset;
  if (buf.readUInt32LE(at) !== LOCAL_SIGNATURE) {
    throw new Error(`corrupt local header for ${entry.name}`);
  }
  const nameLength = buf.readUInt16LE(at + 26);
  const extraLength = buf.readUInt16LE(at + 28);
  const start = at + 30 + nameLength + extraLength;
  const raw = buf.subarray(start, start + entry.compressedSize);
  if (entry.compression === 0) return Buffer.from(raw);
  if (entry.compression === 8) return inflateRawSync(raw);
  throw new Error(`unsupported zip compression method ${entry.compression} for ${entry.name}`);
}

function parseNpy(buf: Buffer, name: string): NpyArray {
  if (buf.length < 10 || buf[0] !== 0x93 || buf.toString('ascii', 1, 6) !== 'NUMPY') {
    throw new Error(`${name}: not an npy file`);
  }
  const major = buf[6];
  let headerLength: number;
  let headerStart: number;
  if (major === 1) {
    headerLength = buf.readUInt16LE(8);
    headerStart = 10;
  } else {
    headerLength = buf.readUInt32LE(8);
    headerStart = 12;
  }
  const header = buf.toString('latin1', headerStart, headerStart + headerLength);
  const descrMatch = header.match(/'descr':\s*'([^']+)'/);
  const fortranMatch = header.match(/'fortran_order':\s*(True|False)/);
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!descrMatch || !fortranMatch || !shapeMatch) {
    throw new Error(`${name}: unparseable npy header: ${header.trim()}`);
  }
  const descr = descrMatch[1];
  const fortranOrder = fortranMatch[1] === 'True';
  const shape = shapeMatch[1]
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const body = buf.subarray(headerStart + headerLength);
  const data = new Float64Array(count);
  const read = readerFor(descr, name);
  for (let i = 0; i < count; i++) data[i] = read(body, i);
  return { data, shape, fortranOrder };
}

function readerFor(descr: string, name: string): (b: Buffer, i: number) => number {
  switch (descr) {
    case '<f8':
      return (b, i) => b.readDoubleLE(i * 8);
    case '<f4':
      return (b, i) => b.readFloatLE(i * 4);
    case '<i8':
      return (b, i) => Number(b.readBigInt64LE(i * 8));
    case '<i4':
      return (b, i) => b.readInt32LE(i * 4);
    case '<i2':
      return (b, i) => b.readInt16LE(i * 2);
    case '|b1':
    case '|u1':
      return (b, i) => b.readUInt8(i);
    default:
      throw new Error(`${name}: unsupported dtype ${descr}`);
  }
}

/** Read every array in a .npz archive, keyed by member name sans '.npy'. */
export function readNpz(buf: Buffer): Record<string, NpyArray> {
  const out: Record<string, NpyArray> = {};
  for (const entry of readZipEntries(buf)) {
    const body = extractEntry(buf, entry);
    out[entry.name.replace(/\.npy$/i, '')] = parseNpy(body, entry.name);
  }
  return out;
}

/** Element accessor honoring C or Fortran storage order. */
export function at(arr: NpyArray, ...index: number[]): number {
  if (index.length !== arr.shape.length) {
    throw new Error(`rank mismatch: index ${index} into shape ${arr.shape}`);
  }
  let flat = 0;
  if (arr.fortranOrder) {
    let stride = 1;
    for (let d = 0; d < arr.shape.length; d++) {
      flat += index[d] * stride;
      stride *= arr.shape[d];
    }
  } else {
    for (let d = 0; d < arr.shape.length; d++) {
      flat = flat * arr.shape[d] + index[d];
    }
  }
  return arr.data[flat];
}

export function shapeOf(arr: NpyArray): string {
  return `(${arr.shape.join(', ')})`;
}
