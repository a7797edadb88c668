/**
 * Contrast-invariance experiment: train one model on the full augmented
 * batch file and one on its real-MPRAGE records only, then compare how
 * consistently each segments two renderings of the same phantom (the
 * training-like MPRAGE contrast vs a strongly T2-weighted FLASH contrast).
 * The score per model is the mean cross-contrast Dice over phantoms and
 * tissue labels; higher means more contrast-robust.
 */

import * as tf from '@tensorflow/tfjs';

import { labelDice, predictStitched } from './predict.js';
import { readPsab } from './psab.js';
import { train } from './train.js';
import { mean } from './util.js';

export interface InvarianceConfig {
  trainFile: string;
  evalFileA: string;  // one full-volume record per phantom, contrast A
  evalFileB: string;  // same phantoms, contrast B
  seeds: number[];
  epochs?: number;
  patch?: number;
  stride?: number;
  baseFilters?: number;
}

export interface SeedOutcome {
  seed: number;
  augmentedDice: number;
  realOnlyDice: number;
  win: boolean;
}

export interface InvarianceResult {
  outcomes: SeedOutcome[];
  wins: number;
}

async function crossContrastDice(model: Awaited<ReturnType<typeof train>>,
                                 config: InvarianceConfig): Promise<number> {
  const evalA = readPsab(config.evalFileA);
  const evalB = readPsab(config.evalFileB);
  const patch = config.patch ?? model.dims[0];
  const stride = config.stride ?? Math.max(1, Math.floor(patch / 2));
  const scores: number[] = [];
  for (let p = 0; p < evalA.records.length; p++) {
    const predA = predictStitched(model.model, {
      volume: evalA.records[p].intensity, dims: evalA.dims, patch, stride,
    });
    const predB = predictStitched(model.model, {
      volume: evalB.records[p].intensity, dims: evalB.dims, patch, stride,
    });
    // score only structures at least one prediction claims; counting a
    // label absent from both as agreement would reward collapsed models
    const perLabel: number[] = [];
    for (let label = 1; label < evalA.labelCount; label++) {
      const claimed = predA.includes(label) || predB.includes(label);
      if (claimed) {
        perLabel.push(labelDice(predA, predB, label));
      }
    }
    scores.push(perLabel.length ? mean(perLabel) : 0);
  }
  return mean(scores);
}

export async function runInvariance(config: InvarianceConfig): Promise<InvarianceResult> {
  const outcomes: SeedOutcome[] = [];
  for (const seed of config.seeds) {
    const augmented = await train({
      batchFile: config.trainFile,
      epochs: config.epochs ?? 4,
      seed,
      baseFilters: config.baseFilters,
    });
    const augmentedDice = await crossContrastDice(augmented, config);
    augmented.model.dispose();

    const realOnly = await train({
      batchFile: config.trainFile,
      epochs: config.epochs ?? 4,
      seed,
      baseFilters: config.baseFilters,
      recordFilter: (r) => r.provenance === 'real',
    });
    const realOnlyDice = await crossContrastDice(realOnly, config);
    realOnly.model.dispose();

    outcomes.push({
      seed,
      augmentedDice,
      realOnlyDice,
      win: augmentedDice > realOnlyDice,
    });
    tf.disposeVariables();
  }
  return { outcomes, wins: outcomes.filter((o) => o.win).length };
}
