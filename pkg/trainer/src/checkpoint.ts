/**
 * Flat binary model checkpoints: a JSON manifest (architecture + tensor
 * shapes) followed by little-endian float32 weight data.
 */

import { readFileSync, writeFileSync } from 'node:fs';

import * as tf from '@tensorflow/tfjs';

import { buildSegmenter, Segmenter, SegmenterConfig } from './model.js';

const MAGIC = 'TOYSEG1';

interface Manifest {
  magic: string;
  config: SegmenterConfig;
  shapes: number[][];
}

export function saveCheckpoint(model: Segmenter, config: SegmenterConfig,
                               path: string): void {
  const shapes = model.variables.map((v) => v.shape.slice());
  const manifest: Manifest = { magic: MAGIC, config, shapes };
  const head = Buffer.from(JSON.stringify(manifest), 'utf-8');
  const chunks: Buffer[] = [];
  const lenBuf = Buffer.alloc(4);
  lenBuf.writeUInt32LE(head.length);
  chunks.push(lenBuf, head);
  for (const variable of model.variables) {
    const data = variable.dataSync() as Float32Array;
    chunks.push(Buffer.from(data.buffer.slice(data.byteOffset,
      data.byteOffset + data.byteLength)));
  }
  writeFileSync(path, Buffer.concat(chunks));
}

export function loadCheckpoint(path: string): Segmenter {
  const raw = readFileSync(path);
  const headLen = raw.readUInt32LE(0);
  const manifest = JSON.parse(raw.subarray(4, 4 + headLen).toString('utf-8')) as Manifest;
  if (manifest.magic !== MAGIC) {
    throw new Error(`${path}: not a model checkpoint`);
  }
  const model = buildSegmenter(manifest.config);
  let offset = 4 + headLen;
  model.variables.forEach((variable, i) => {
    const n = manifest.shapes[i].reduce((a, b) => a * b, 1);
    const data = new Float32Array(n);
    for (let j = 0; j < n; j++) data[j] = raw.readFloatLE(offset + 4 * j);
    offset += 4 * n;
    variable.assign(tf.tensor(data, manifest.shapes[i] as number[]));
  });
  return model;
}
