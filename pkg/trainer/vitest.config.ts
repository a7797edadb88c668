import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    // tfjs CPU training is heavy; run files sequentially with long budgets
    fileParallelism: false,
    testTimeout: 900_000,
    hookTimeout: 120_000,
  },
});
