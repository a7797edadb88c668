/** Soft Dice loss over one-hot targets and softmax predictions. */

import * as tf from '@tensorflow/tfjs';

/**
 * Per sample: 1 - 2 * sum(t * p) / (sum(t^2) + sum(p^2)), with the sums
 * flattened over all voxels and labels; the batch loss is the mean over
 * samples. Bounded in [0, 1] for one-hot targets and row-stochastic
 * predictions.
 */
export function softDiceLoss(yTrue: tf.Tensor, yPred: tf.Tensor): tf.Scalar {
  if (yTrue.shape.join() !== yPred.shape.join()) {
    throw new Error(`shape mismatch: ${yTrue.shape} vs ${yPred.shape}`);
  }
  return tf.tidy(() => {
    const axes = Array.from({ length: yTrue.rank - 1 }, (_, i) => i + 1);
    const overlap = tf.sum(tf.mul(yTrue, yPred), axes);
    const mass = tf.add(tf.sum(tf.square(yTrue), axes), tf.sum(tf.square(yPred), axes));
    const perSample = tf.sub(1, tf.div(tf.mul(overlap, 2), mass));
    return tf.mean(perSample);
  });
}
