/** Command-line entry: run the invariance experiment on the fixtures. */

import { runInvariance } from './invariance.js';

const start = performance.now();
const result = await runInvariance({
  trainFile: 'fixtures/train_16.psab',
  evalFileA: 'fixtures/eval_mprage.psab',
  evalFileB: 'fixtures/eval_flash.psab',
  seeds: [1, 2, 3, 4, 5],
  patch: 16,
  stride: 8,
});

for (const o of result.outcomes) {
  const tag = o.win ? 'WIN ' : 'LOSS';
  console.log(`seed ${o.seed}: augmented ${o.augmentedDice.toFixed(4)} vs ` +
    `real-only ${o.realOnlyDice.toFixed(4)}  ${tag}`);
}
const minutes = (performance.now() - start) / 60000;
console.log(`augmented model wins ${result.wins}/${result.outcomes.length} seeds ` +
  `in ${minutes.toFixed(1)} min`);
process.exit(result.wins >= 4 ? 0 : 1);
