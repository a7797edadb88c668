/**
 * Stitched whole-volume prediction: overlapping patches at a fixed stride,
 * softmax probabilities averaged per voxel, argmax with ties broken toward
 * the lower label id.
 */

import * as tf from '@tensorflow/tfjs';

import { Segmenter } from './model.js';
import { Dims } from './psab.js';

/** window start positions covering [0, dim - patch] with a flush final window */
export function windowStarts(dim: number, patch: number, stride: number): number[] {
  if (patch > dim) {
    throw new Error(`patch ${patch} exceeds volume dim ${dim}`);
  }
  const starts: number[] = [];
  for (let s = 0; s + patch < dim; s += stride) starts.push(s);
  starts.push(dim - patch);
  return starts;
}

export interface StitchOptions {
  volume: Float32Array;
  dims: Dims;
  patch: number;
  stride: number;
  batchSize?: number;
}

/**
 * Accumulates probabilities over every covering patch, divides by the
 * coverage count, and takes the per-voxel argmax.
 */
export function predictStitched(model: Segmenter, opts: StitchOptions): Uint16Array {
  const { volume, dims, patch, stride } = opts;
  const [dx, dy, dz] = dims;
  const n = dx * dy * dz;
  const labels = model.labelCount;
  const probSum = new Float32Array(n * labels);
  const cover = new Float32Array(n);

  const corners: Dims[] = [];
  for (const i of windowStarts(dx, patch, stride)) {
    for (const j of windowStarts(dy, patch, stride)) {
      for (const k of windowStarts(dz, patch, stride)) {
        corners.push([i, j, k]);
      }
    }
  }

  const batchSize = opts.batchSize ?? 8;
  const pn = patch * patch * patch;
  for (let b = 0; b < corners.length; b += batchSize) {
    const chunk = corners.slice(b, b + batchSize);
    const xData = new Float32Array(chunk.length * pn);
    chunk.forEach((corner, c) => {
      let w = c * pn;
      for (let k = 0; k < patch; k++) {
        for (let j = 0; j < patch; j++) {
          const base = corner[0] + dx * (corner[1] + j + dy * (corner[2] + k));
          for (let i = 0; i < patch; i++) {
            xData[w++] = volume[base + i];
          }
        }
      }
    });
    const probs = tf.tidy(() => {
      const x = tf.tensor5d(xData, [chunk.length, patch, patch, patch, 1]);
      return model.forward(x);
    });
    const pData = probs.dataSync() as Float32Array;
    probs.dispose();
    chunk.forEach((corner, c) => {
      let r = c * pn * labels;
      for (let k = 0; k < patch; k++) {
        for (let j = 0; j < patch; j++) {
          const base = corner[0] + dx * (corner[1] + j + dy * (corner[2] + k));
          for (let i = 0; i < patch; i++) {
            const v = base + i;
            cover[v] += 1;
            const out = v * labels;
            for (let l = 0; l < labels; l++) {
              probSum[out + l] += pData[r++];
            }
          }
        }
      }
    });
  }

  const out = new Uint16Array(n);
  for (let v = 0; v < n; v++) {
    let best = 0;
    let bestProb = probSum[v * labels] / cover[v];
    for (let l = 1; l < labels; l++) {
      const p = probSum[v * labels + l] / cover[v];
      if (p > bestProb) {
        best = l;
        bestProb = p;
      }
    }
    out[v] = best;
  }
  return out;
}

/** Dice overlap of one label between two hard segmentations; 1 if both empty. */
export function labelDice(a: ArrayLike<number>, b: ArrayLike<number>, label: number): number {
  let na = 0;
  let nb = 0;
  let overlap = 0;
  for (let v = 0; v < a.length; v++) {
    const inA = a[v] === label;
    const inB = b[v] === label;
    if (inA) na++;
    if (inB) nb++;
    if (inA && inB) overlap++;
  }
  if (na + nb === 0) return 1;
  return (2 * overlap) / (na + nb);
}
