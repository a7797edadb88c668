/**
 * Training loop: Adam on the soft Dice loss with a fixed 10% record
 * holdout, early stopping on validation plateau (patience 3), and a
 * deterministic loss curve for a given seed.
 */

import { writeFileSync } from 'node:fs';

import * as tf from '@tensorflow/tfjs';

import { epochBatches, recordsToTensors, splitHoldout } from './data.js';
import { softDiceLoss } from './loss.js';
import { buildSegmenter, Segmenter, SegmenterConfig } from './model.js';
import { BatchRecord, Dims, readPsab } from './psab.js';

export interface TrainConfig {
  /** one PSAB file or several sharing dims and label count */
  batchFile: string | string[];
  epochs: number;
  learningRate?: number;
  batchSize?: number;
  seed: number;
  patience?: number;
  baseFilters?: number;
  levels?: number;
  convsPerLevel?: number;
  /** keep only matching records (e.g. provenance filters) */
  recordFilter?: (record: BatchRecord) => boolean;
  /** test hook applied after filtering, before the holdout split */
  recordTransform?: (records: BatchRecord[]) => BatchRecord[];
}

export interface EpochStats {
  epoch: number;
  trainLoss: number;
  valLoss: number;
}

export interface TrainResult {
  model: Segmenter;
  modelConfig: SegmenterConfig;
  curve: EpochStats[];
  dims: Dims;
  labelCount: number;
  stoppedEarly: boolean;
}

function readBatchFiles(paths: string | string[]) {
  const list = Array.isArray(paths) ? paths : [paths];
  if (list.length === 0) {
    throw new Error('no batch files given');
  }
  const first = readPsab(list[0]);
  const records = [...first.records];
  for (const path of list.slice(1)) {
    const file = readPsab(path);
    if (file.dims.join() !== first.dims.join() || file.labelCount !== first.labelCount) {
      throw new Error(`${path}: patch dims/label count differ from ${list[0]}`);
    }
    records.push(...file.records);
  }
  return { dims: first.dims, labelCount: first.labelCount, records };
}

export async function train(config: TrainConfig): Promise<TrainResult> {
  await tf.setBackend('cpu');
  await tf.ready();

  const file = readBatchFiles(config.batchFile);
  let records = config.recordFilter
    ? file.records.filter(config.recordFilter)
    : file.records;
  if (config.recordTransform) {
    records = config.recordTransform(records);
  }
  if (records.length < 2) {
    throw new Error(`not enough records to train on (${records.length})`);
  }

  const { train: trainRecords, val: valRecords } = splitHoldout(records);
  const trainSet = recordsToTensors(trainRecords, file.dims, file.labelCount);
  const valSet = recordsToTensors(valRecords, file.dims, file.labelCount);

  const modelConfig: SegmenterConfig = {
    labelCount: file.labelCount,
    seed: config.seed,
    baseFilters: config.baseFilters,
    levels: config.levels,
    convsPerLevel: config.convsPerLevel,
  };
  const model = buildSegmenter(modelConfig);
  const optimizer = tf.train.adam(config.learningRate ?? 0.05);
  const batchSize = config.batchSize ?? 4;
  const patience = config.patience ?? 3;

  const curve: EpochStats[] = [];
  let bestVal = Infinity;
  let sinceBest = 0;
  let stoppedEarly = false;

  const evalLoss = (set: { x: tf.Tensor5D; y: tf.Tensor5D }): number =>
    tf.tidy(() => softDiceLoss(set.y, model.forward(set.x)).dataSync()[0]);

  for (let epoch = 1; epoch <= config.epochs; epoch++) {
    const batches = epochBatches(trainRecords.length, batchSize, config.seed, epoch);
    let lossSum = 0;
    for (const indices of batches) {
      const idx = tf.tensor1d(indices, 'int32');
      const bx = tf.gather(trainSet.x, idx) as tf.Tensor5D;
      const by = tf.gather(trainSet.y, idx) as tf.Tensor5D;
      const loss = optimizer.minimize(
        () => softDiceLoss(by, model.forward(bx)), true) as tf.Scalar;
      lossSum += loss.dataSync()[0];
      tf.dispose([idx, bx, by, loss]);
    }
    const valLoss = evalLoss(valSet);
    curve.push({ epoch, trainLoss: lossSum / batches.length, valLoss });
    if (valLoss < bestVal - 1e-9) {
      bestVal = valLoss;
      sinceBest = 0;
    } else if (++sinceBest >= patience) {
      stoppedEarly = true;
      break;
    }
  }

  tf.dispose([trainSet.x, trainSet.y, valSet.x, valSet.y]);
  optimizer.dispose();
  return { model, modelConfig, curve, dims: file.dims,
           labelCount: file.labelCount, stoppedEarly };
}

export function writeLossCurveCsv(curve: EpochStats[], path: string): void {
  const lines = ['epoch,train_loss,val_loss'];
  for (const row of curve) {
    lines.push(`${row.epoch},${row.trainLoss},${row.valLoss}`);
  }
  writeFileSync(path, lines.join('\n') + '\n');
}
