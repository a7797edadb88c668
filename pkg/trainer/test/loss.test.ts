import * as tf from '@tensorflow/tfjs';
import { beforeAll, describe, expect, it } from 'vitest';

import { softDiceLoss } from '../src/loss.js';

beforeAll(async () => {
  await tf.setBackend('cpu');
  await tf.ready();
});

const scalar = (t: tf.Scalar) => t.dataSync()[0];

describe('softDiceLoss', () => {
  it('is zero for a perfect one-hot match', () => {
    const y = tf.tensor([[[1, 0], [0, 1], [0, 1]]]);  // [1, 3, 2]
    expect(scalar(softDiceLoss(y, y))).toBeCloseTo(0, 7);
  });

  it('is one for fully disjoint one-hot predictions', () => {
    const yTrue = tf.tensor([[[1, 0], [1, 0]]]);
    const yPred = tf.tensor([[[0, 1], [0, 1]]]);
    expect(scalar(softDiceLoss(yTrue, yPred))).toBeCloseTo(1, 7);
  });

  it('matches the two-voxel hand computation', () => {
    // overlap = 1.0, masses 2 + 1 -> loss = 1 - 2/3 = 1/3
    const yTrue = tf.tensor([[[1, 0], [0, 1]]]);
    const yPred = tf.tensor([[[0.5, 0.5], [0.5, 0.5]]]);
    expect(scalar(softDiceLoss(yTrue, yPred))).toBeCloseTo(1 / 3, 7);
  });

  it('averages over the batch', () => {
    const yTrue = tf.tensor([[[1, 0]], [[1, 0]]]);  // two samples
    const yPredPerfect = tf.tensor([[[1, 0]], [[0, 1]]]);  // 0 and 1
    expect(scalar(softDiceLoss(yTrue, yPredPerfect))).toBeCloseTo(0.5, 7);
  });

  it('stays within [0, 1] for random row-stochastic predictions', () => {
    for (let seed = 0; seed < 10; seed++) {
      const loss = tf.tidy(() => {
        const labels = tf.oneHot(
          tf.randomUniform([1, 20], 0, 4, 'int32', seed), 4).reshape([1, 20, 4]);
        const pred = tf.softmax(tf.randomNormal([1, 20, 4], 0, 3, 'float32', seed + 100), -1);
        return scalar(softDiceLoss(labels as tf.Tensor, pred));
      });
      expect(loss).toBeGreaterThanOrEqual(0);
      expect(loss).toBeLessThanOrEqual(1);
    }
  });

  it('rejects mismatched shapes', () => {
    const a = tf.zeros([1, 2, 2]);
    const b = tf.zeros([1, 2, 3]);
    expect(() => softDiceLoss(a, b)).toThrow(/shape/);
  });
});
