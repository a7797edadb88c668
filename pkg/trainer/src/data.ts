/** PSAB records to training tensors, holdout split, and seeded batching. */

import * as tf from '@tensorflow/tfjs';

import { BatchRecord, Dims } from './psab.js';
import { rng, shuffled } from './util.js';

export interface TensorPair {
  /** [N, D, H, W, 1] intensities */
  x: tf.Tensor5D;
  /** [N, D, H, W, L] one-hot labels */
  y: tf.Tensor5D;
}

/**
 * Packs records into dense tensors. Patch arrays are fastest-axis-first,
 * so the natural tensor layout is [W, H, D] per patch; all consumers only
 * need a consistent spatial layout, which this is.
 */
export function recordsToTensors(records: BatchRecord[], dims: Dims,
                                 labelCount: number): TensorPair {
  const n = dims[0] * dims[1] * dims[2];
  const xData = new Float32Array(records.length * n);
  const yData = new Float32Array(records.length * n * labelCount);
  records.forEach((record, r) => {
    xData.set(record.intensity, r * n);
    const yBase = r * n * labelCount;
    for (let v = 0; v < n; v++) {
      yData[yBase + v * labelCount + record.labels[v]] = 1;
    }
  });
  const shape: [number, number, number, number, number] =
    [records.length, dims[2], dims[1], dims[0], 1];
  const x = tf.tensor5d(xData, shape);
  const y = tf.tensor(yData, [records.length, dims[2], dims[1], dims[0], labelCount]) as tf.Tensor5D;
  return { x, y };
}

export interface Split<T> {
  train: T[];
  val: T[];
}

/** fixed holdout: every tenth record (by position) goes to validation */
export function splitHoldout<T>(records: T[], every = 10): Split<T> {
  const train: T[] = [];
  const val: T[] = [];
  records.forEach((record, i) => {
    (i % every === every - 1 ? val : train).push(record);
  });
  if (val.length === 0 && records.length > 1) {
    val.push(train.pop() as T);
  }
  return { train, val };
}

/** seeded per-epoch batch index lists; order is a pure function of the seed */
export function epochBatches(n: number, batchSize: number, seed: number,
                             epoch: number): number[][] {
  const order = shuffled(n, rng(seed * 9973 + epoch));
  const batches: number[][] = [];
  for (let i = 0; i < n; i += batchSize) {
    batches.push(order.slice(i, i + batchSize));
  }
  return batches;
}
