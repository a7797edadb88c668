import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { BatchRecord } from '../src/psab.js';
import { epochBatches, splitHoldout } from '../src/data.js';
import { train, writeLossCurveCsv } from '../src/train.js';
import { rng, shuffled } from '../src/util.js';

const TRAIN_FILE = 'fixtures/train_16.psab';
// real-MPRAGE records only: a small, fast subset for the loop tests
const realOnly = (r: BatchRecord) => r.provenance === 'real';

describe('splitHoldout', () => {
  it('holds out every tenth record', () => {
    const items = Array.from({ length: 23 }, (_, i) => i);
    const { train: tr, val } = splitHoldout(items);
    expect(val).toEqual([9, 19]);
    expect(tr).toHaveLength(21);
  });

  it('always keeps at least one validation item', () => {
    const { train: tr, val } = splitHoldout([1, 2, 3]);
    expect(val).toHaveLength(1);
    expect(tr).toHaveLength(2);
  });
});

describe('epochBatches', () => {
  it('partitions all indices deterministically', () => {
    const a = epochBatches(10, 4, 7, 1);
    const b = epochBatches(10, 4, 7, 1);
    expect(a).toEqual(b);
    expect(a.flat().slice().sort((x, y) => x - y)).toEqual(
      Array.from({ length: 10 }, (_, i) => i));
    expect(epochBatches(10, 4, 7, 2)).not.toEqual(a);
  });
});

describe('util rng', () => {
  it('is deterministic and roughly uniform', () => {
    const r1 = rng(5);
    const r2 = rng(5);
    const seq = Array.from({ length: 8 }, () => r1());
    expect(Array.from({ length: 8 }, () => r2())).toEqual(seq);
    const big = rng(6);
    const m = Array.from({ length: 2000 }, () => big()).reduce((a, b) => a + b) / 2000;
    expect(m).toBeGreaterThan(0.45);
    expect(m).toBeLessThan(0.55);
  });

  it('shuffles into a permutation', () => {
    const order = shuffled(20, rng(3));
    expect(order.slice().sort((a, b) => a - b)).toEqual(
      Array.from({ length: 20 }, (_, i) => i));
  });
});

describe('train', () => {
  it('reduces the loss on phantom batches', async () => {
    const result = await train({
      batchFile: TRAIN_FILE, epochs: 3, seed: 11, recordFilter: realOnly,
    });
    const first = result.curve[0].trainLoss;
    const last = result.curve[result.curve.length - 1].trainLoss;
    expect(last).toBeLessThan(first);
    result.model.dispose();
  });

  it('is deterministic for a fixed seed', async () => {
    const a = await train({
      batchFile: TRAIN_FILE, epochs: 2, seed: 4, recordFilter: realOnly,
    });
    const b = await train({
      batchFile: TRAIN_FILE, epochs: 2, seed: 4, recordFilter: realOnly,
    });
    expect(a.curve).toEqual(b.curve);
    a.model.dispose();
    b.model.dispose();
  });

  it('stagnates when labels are permuted randomly per record', async () => {
    const clean = await train({
      batchFile: TRAIN_FILE, epochs: 3, seed: 2, recordFilter: realOnly,
    });
    const permuted = await train({
      batchFile: TRAIN_FILE, epochs: 3, seed: 2, recordFilter: realOnly,
      recordTransform: (records) => {
        const random = rng(13);
        return records.map((record) => {
          const perm = shuffled(4, random);
          const labels = new Uint16Array(record.labels.length);
          for (let v = 0; v < labels.length; v++) {
            labels[v] = perm[record.labels[v]];
          }
          return { ...record, labels };
        });
      },
    });
    const drop = (r: Awaited<ReturnType<typeof train>>) =>
      r.curve[0].trainLoss - r.curve[r.curve.length - 1].trainLoss;
    // scrambled targets must learn far less than consistent ones
    expect(drop(permuted)).toBeLessThan(0.5 * drop(clean));
    clean.model.dispose();
    permuted.model.dispose();
  });

  it('writes a loss-curve CSV', async () => {
    const result = await train({
      batchFile: TRAIN_FILE, epochs: 1, seed: 1, recordFilter: realOnly,
    });
    const path = join(mkdtempSync(join(tmpdir(), 'curve-')), 'loss.csv');
    writeLossCurveCsv(result.curve, path);
    const text = readFileSync(path, 'utf-8');
    expect(text.startsWith('epoch,train_loss,val_loss\n')).toBe(true);
    expect(text.trim().split('\n')).toHaveLength(1 + result.curve.length);
    result.model.dispose();
  });

  it('stops early on a validation plateau', async () => {
    // a permuted-label run cannot improve validation loss for long
    const result = await train({
      batchFile: TRAIN_FILE, epochs: 30, seed: 3, recordFilter: realOnly,
      patience: 1,
      recordTransform: (records) => {
        const random = rng(17);
        return records.map((record) => {
          const perm = shuffled(4, random);
          const labels = new Uint16Array(record.labels.length);
          for (let v = 0; v < labels.length; v++) {
            labels[v] = perm[record.labels[v]];
          }
          return { ...record, labels };
        });
      },
    });
    expect(result.curve.length).toBeLessThan(30);
    expect(result.stoppedEarly).toBe(true);
    result.model.dispose();
  });
});
