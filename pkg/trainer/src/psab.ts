/**
 * Readers for the PSAB/PSBR binary batch formats.
 *
 * Both are little-endian. Header: magic (4 bytes), version u32 (=1), record
 * count u64, patch dims 3*u32, then label count u32 (PSAB) or target-kind u8
 * (PSBR). Each record: subject-id length u16 + utf-8 bytes, provenance u8
 * (0 real, 1 synthetic), kind u8, theta 3*f64 (zeros for real), corner
 * 3*u32, intensity f32[n], then labels u16[n] (PSAB) or target f32[n]
 * (PSBR). Patch arrays are fastest-axis-first.
 */

import { readFileSync } from 'node:fs';

export type SequenceKind = 'flash' | 'spgr' | 'mprage' | 't2space';
export type Provenance = 'real' | 'synthetic';
export type Dims = [number, number, number];

const KINDS: SequenceKind[] = ['flash', 'spgr', 'mprage', 't2space'];
const VERSION = 1;

export interface BatchRecord {
  subjectId: string;
  provenance: Provenance;
  kind: SequenceKind;
  theta: [number, number, number] | null;
  corner: Dims;
  /** fastest-axis-first voxels, length = dims product */
  intensity: Float32Array;
  labels: Uint16Array;
}

export interface RegressionRecord extends Omit<BatchRecord, 'labels'> {
  target: Float32Array;
}

export interface PsabFile {
  dims: Dims;
  labelCount: number;
  records: BatchRecord[];
}

export interface PsbrFile {
  dims: Dims;
  targetKind: 'rho' | 't1' | 't2';
  records: RegressionRecord[];
}

class Cursor {
  pos = 0;
  constructor(readonly buf: Buffer, readonly path: string) {}

  need(n: number, what: string): void {
    if (this.pos + n > this.buf.length) {
      throw new Error(`${this.path}: truncated while reading ${what} at offset ${this.pos}`);
    }
  }

  u8(what: string): number {
    this.need(1, what);
    return this.buf.readUInt8(this.pos++);
  }

  u16(what: string): number {
    this.need(2, what);
    const v = this.buf.readUInt16LE(this.pos);
    this.pos += 2;
    return v;
  }

  u32(what: string): number {
    this.need(4, what);
    const v = this.buf.readUInt32LE(this.pos);
    this.pos += 4;
    return v;
  }

  u64(what: string): number {
    this.need(8, what);
    const v = this.buf.readBigUInt64LE(this.pos);
    this.pos += 8;
    if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new Error(`${this.path}: ${what} ${v} too large`);
    }
    return Number(v);
  }

  f64(what: string): number {
    this.need(8, what);
    const v = this.buf.readDoubleLE(this.pos);
    this.pos += 8;
    return v;
  }

  bytes(n: number, what: string): Buffer {
    this.need(n, what);
    const v = this.buf.subarray(this.pos, this.pos + n);
    this.pos += n;
    return v;
  }

  /** copies into a fresh aligned buffer; record offsets are unaligned */
  f32Array(n: number, what: string): Float32Array {
    const raw = this.bytes(4 * n, what);
    const out = new Float32Array(n);
    for (let i = 0; i < n; i++) out[i] = raw.readFloatLE(4 * i);
    return out;
  }

  u16Array(n: number, what: string): Uint16Array {
    const raw = this.bytes(2 * n, what);
    const out = new Uint16Array(n);
    for (let i = 0; i < n; i++) out[i] = raw.readUInt16LE(2 * i);
    return out;
  }
}

function readHeader(cur: Cursor, magic: string): { count: number; dims: Dims } {
  const got = cur.bytes(4, 'magic').toString('latin1');
  if (got !== magic) {
    throw new Error(`${cur.path}: magic ${JSON.stringify(got)}, expected ${magic}`);
  }
  const version = cur.u32('version');
  if (version !== VERSION) {
    throw new Error(`${cur.path}: unsupported version ${version} (reader knows ${VERSION})`);
  }
  const count = cur.u64('record count');
  const dims: Dims = [cur.u32('dim0'), cur.u32('dim1'), cur.u32('dim2')];
  return { count, dims };
}

function readRecordHead(cur: Cursor, n: number) {
  const sidLen = cur.u16('subject id length');
  const subjectId = cur.bytes(sidLen, 'subject id').toString('utf-8');
  const provCode = cur.u8('provenance');
  if (provCode !== 0 && provCode !== 1) {
    throw new Error(`${cur.path}: bad provenance code ${provCode}`);
  }
  const provenance: Provenance = provCode === 0 ? 'real' : 'synthetic';
  const kindCode = cur.u8('kind');
  const kind = KINDS[kindCode];
  if (kind === undefined) {
    throw new Error(`${cur.path}: bad sequence kind code ${kindCode}`);
  }
  const t: [number, number, number] = [cur.f64('theta0'), cur.f64('theta1'), cur.f64('theta2')];
  const theta = provenance === 'real' ? null : t;
  const corner: Dims = [cur.u32('corner0'), cur.u32('corner1'), cur.u32('corner2')];
  const intensity = cur.f32Array(n, 'intensity patch');
  return { subjectId, provenance, kind, theta, corner, intensity };
}

export function readPsab(path: string): PsabFile {
  const cur = new Cursor(readFileSync(path), path);
  const { count, dims } = readHeader(cur, 'PSAB');
  const labelCount = cur.u32('label count');
  const n = dims[0] * dims[1] * dims[2];
  const records: BatchRecord[] = [];
  for (let i = 0; i < count; i++) {
    const head = readRecordHead(cur, n);
    const labels = cur.u16Array(n, 'label patch');
    records.push({ ...head, labels });
  }
  return { dims, labelCount, records };
}

export function readPsbr(path: string): PsbrFile {
  const cur = new Cursor(readFileSync(path), path);
  const { count, dims } = readHeader(cur, 'PSBR');
  const targetCode = cur.u8('target kind');
  const targetKinds = ['rho', 't1', 't2'] as const;
  const targetKind = targetKinds[targetCode];
  if (targetKind === undefined) {
    throw new Error(`${path}: bad target kind code ${targetCode}`);
  }
  const n = dims[0] * dims[1] * dims[2];
  const records: RegressionRecord[] = [];
  for (let i = 0; i < count; i++) {
    const head = readRecordHead(cur, n);
    const target = cur.f32Array(n, 'target patch');
    records.push({ ...head, target });
  }
  return { dims, targetKind, records };
}

/** voxel value at (i, j, k) of a fastest-axis-first patch */
export function voxel(flat: ArrayLike<number>, dims: Dims, i: number, j: number, k: number): number {
  return flat[i + dims[0] * (j + dims[1] * k)];
}
