/**
 * A small 3D U-Net built from raw ops so every piece works on the CPU
 * backend: conv3d + relu pairs, max-pool descents, nearest-neighbor
 * upsampling with skip concatenation, and a softmax head.
 */

import * as tf from '@tensorflow/tfjs';

export interface SegmenterConfig {
  labelCount: number;
  /** number of pooling steps (default 3) */
  levels?: number;
  /** channels of the first level; doubles per level (default 4) */
  baseFilters?: number;
  /** conv+norm units per level (default 1 at toy scale) */
  convsPerLevel?: number;
  seed: number;
}

export interface Segmenter {
  readonly labelCount: number;
  readonly variables: tf.Variable[];
  /** [N, D, H, W, 1] -> [N, D, H, W, L] softmax probabilities */
  forward(x: tf.Tensor5D): tf.Tensor5D;
  dispose(): void;
}

/**
 * Nearest-neighbor 2x upsampling of [N, D, H, W, C] via expand + self-concat
 * + reshape per axis (tile has no rank-6 gradient on the CPU backend).
 */
export function upsample2x(x: tf.Tensor5D): tf.Tensor5D {
  return tf.tidy(() => {
    let out: tf.Tensor = x;
    for (let axis = 1; axis <= 3; axis++) {
      const shape = out.shape.slice();
      const expanded = out.expandDims(axis + 1);
      shape[axis] *= 2;
      out = tf.concat([expanded, expanded], axis + 1).reshape(shape);
    }
    return out as tf.Tensor5D;
  });
}

interface ConvUnit {
  kernel: tf.Variable;
  bias: tf.Variable;
  /** per-channel normalization parameters; absent on the head */
  gamma?: tf.Variable;
  beta?: tf.Variable;
}

function convUnit(cin: number, cout: number, seed: number, size = 3,
                  normalized = true): ConvUnit {
  const fanIn = size * size * size * cin;
  const std = Math.sqrt(2 / fanIn);
  const unit: ConvUnit = {
    kernel: tf.variable(tf.randomNormal([size, size, size, cin, cout], 0, std, 'float32', seed)),
    bias: tf.variable(tf.zeros([cout])),
  };
  if (normalized) {
    unit.gamma = tf.variable(tf.ones([cout]));
    unit.beta = tf.variable(tf.zeros([cout]));
  }
  return unit;
}

/**
 * conv -> relu -> per-sample channel normalization. Normalizing each sample
 * on its own statistics (rather than batch statistics) keeps predictions
 * independent of how patches are grouped at inference time.
 */
function apply(unit: ConvUnit, x: tf.Tensor5D): tf.Tensor5D {
  const y = tf.relu(tf.add(tf.conv3d(x, unit.kernel as tf.Tensor5D, 1, 'same'), unit.bias));
  if (!unit.gamma || !unit.beta) {
    return y as tf.Tensor5D;
  }
  const mean = tf.mean(y, [1, 2, 3], true);
  const variance = tf.mean(tf.square(tf.sub(y, mean)), [1, 2, 3], true);
  const normed = tf.div(tf.sub(y, mean), tf.sqrt(tf.add(variance, 1e-3)));
  return tf.add(tf.mul(normed, unit.gamma), unit.beta) as tf.Tensor5D;
}

function applyHead(unit: ConvUnit, x: tf.Tensor5D): tf.Tensor5D {
  return tf.add(tf.conv3d(x, unit.kernel as tf.Tensor5D, 1, 'same'), unit.bias) as tf.Tensor5D;
}

export function buildSegmenter(config: SegmenterConfig): Segmenter {
  const levels = config.levels ?? 3;
  const base = config.baseFilters ?? 4;
  const convs = config.convsPerLevel ?? 1;
  let seed = config.seed;
  const nextSeed = () => (seed = (seed * 1103515245 + 12345) % 2147483647);

  const stack = (cin: number, cout: number): ConvUnit[] => {
    const units = [convUnit(cin, cout, nextSeed())];
    for (let c = 1; c < convs; c++) units.push(convUnit(cout, cout, nextSeed()));
    return units;
  };

  const encoders: ConvUnit[][] = [];
  let cin = 1;
  for (let level = 0; level <= levels; level++) {
    const cout = base * 2 ** level;
    encoders.push(stack(cin, cout));
    cin = cout;
  }
  const decoders: ConvUnit[][] = [];
  for (let level = levels - 1; level >= 0; level--) {
    const skip = base * 2 ** level;
    const below = base * 2 ** (level + 1);
    decoders.push(stack(below + skip, skip));
  }
  const head = convUnit(base, config.labelCount, nextSeed(), 1, false);

  const variables: tf.Variable[] = [];
  for (const stack of [...encoders, ...decoders, [head]]) {
    for (const unit of stack) {
      variables.push(unit.kernel, unit.bias);
      if (unit.gamma && unit.beta) variables.push(unit.gamma, unit.beta);
    }
  }

  const applyStack = (units: ConvUnit[], x: tf.Tensor5D): tf.Tensor5D =>
    units.reduce((h, unit) => apply(unit, h), x);

  const forward = (x: tf.Tensor5D): tf.Tensor5D =>
    tf.tidy(() => {
      const skips: tf.Tensor5D[] = [];
      let h = x;
      for (let level = 0; level < levels; level++) {
        h = applyStack(encoders[level], h);
        skips.push(h);
        h = tf.maxPool3d(h, 2, 2, 'same');
      }
      h = applyStack(encoders[levels], h);
      for (let i = 0; i < decoders.length; i++) {
        const skip = skips[levels - 1 - i];
        h = tf.concat([upsample2x(h), skip], -1) as tf.Tensor5D;
        h = applyStack(decoders[i], h);
      }
      const logits = applyHead(head, h);
      return tf.softmax(logits, -1) as tf.Tensor5D;
    });

  return {
    labelCount: config.labelCount,
    variables,
    forward,
    dispose: () => variables.forEach((v) => v.dispose()),
  };
}
