import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';
import { beforeAll, describe, expect, it } from 'vitest';

import { loadCheckpoint, saveCheckpoint } from '../src/checkpoint.js';
import { buildSegmenter } from '../src/model.js';
import { readPsbr } from '../src/psab.js';

beforeAll(async () => {
  await tf.setBackend('cpu');
  await tf.ready();
});

describe('checkpoint round trip', () => {
  it('restores a model with identical predictions', () => {
    const config = { labelCount: 4, seed: 21, baseFilters: 2, levels: 2 };
    const model = buildSegmenter(config);
    const x = tf.randomUniform([1, 8, 8, 8, 1], 0, 1, 'float32', 5) as tf.Tensor5D;
    const before = model.forward(x).dataSync();

    const path = join(mkdtempSync(join(tmpdir(), 'ckpt-')), 'model.bin');
    saveCheckpoint(model, config, path);
    model.dispose();

    const restored = loadCheckpoint(path);
    const after = restored.forward(x).dataSync();
    expect(Buffer.from(new Float32Array(after).buffer)
      .equals(Buffer.from(new Float32Array(before).buffer))).toBe(true);
    restored.dispose();
  });
});

describe('PSBR regression pairs fixture', () => {
  it('decodes targets that hold exactly the phantom T1 values', () => {
    const file = readPsbr('fixtures/pairs_t1.psbr');
    expect(file.dims).toEqual([8, 8, 8]);
    expect(file.targetKind).toBe('t1');
    expect(file.records).toHaveLength(3);
    const allowed = new Set([1, 4000, 1200, 700]);  // background + tissue T1s
    for (const record of file.records) {
      expect(record.provenance).toBe('synthetic');
      for (const value of record.target) {
        expect(allowed.has(value)).toBe(true);
      }
      for (const value of record.intensity) {
        expect(value).toBeGreaterThanOrEqual(0);
        expect(value).toBeLessThanOrEqual(1);
      }
    }
  });
});
