import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { generateDataset, loadDataset } from '../src/dataset';
import {
  ModelFileError,
  TrainOutcome,
  classifyValues,
  loadModel,
  saveModel,
  trainToy,
} from '../src/model';

let tmp: string;
let outcome: TrainOutcome;

beforeAll(async () => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'toymodel-'));
  generateDataset(path.join(tmp, 'data'), 40, 7);
  const { samples, classes } = loadDataset(path.join(tmp, 'data'));
  outcome = await trainToy(samples, classes.length, 10, 7);
}, 180_000);

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe('training', () => {
  it('reaches at least 90% held-out accuracy', () => {
    expect(outcome.holdoutAccuracy).toBeGreaterThanOrEqual(0.9);
  });

  it('is deterministic under a fixed seed', async () => {
    const { samples, classes } = loadDataset(path.join(tmp, 'data'));
    const again = await trainToy(samples, classes.length, 10, 7);
    expect(again.holdoutAccuracy).toBe(outcome.holdoutAccuracy);
  }, 180_000);

  it('rejects an empty dataset', async () => {
    await expect(trainToy([], 2, 1, 7)).rejects.toThrow(/too few/);
  });
});

describe('model file round trip', () => {
  it('save then load preserves verdicts', async () => {
    const file = path.join(tmp, 'model.json');
    await saveModel(outcome, file);
    const loaded = await loadModel(file);
    expect(loaded.classes).toBe(2);
    const { samples } = loadDataset(path.join(tmp, 'data'));
    for (const sample of samples.slice(0, 8)) {
      const a = classifyValues(outcome, sample.values, 32, 32);
      const b = classifyValues(loaded, sample.values, 32, 32);
      expect(b.label).toBe(a.label);
    }
  }, 60_000);

  it('reports missing and corrupt files distinctly', async () => {
    await expect(loadModel(path.join(tmp, 'absent.json'))).rejects.toThrow(ModelFileError);
    const garbled = path.join(tmp, 'garbled.json');
    fs.writeFileSync(garbled, 'not json at all');
    await expect(loadModel(garbled)).rejects.toThrow(/not valid JSON/);
    const wrong = path.join(tmp, 'wrong.json');
    fs.writeFileSync(wrong, JSON.stringify({ format: 'other' }));
    await expect(loadModel(wrong)).rejects.toThrow(/corrupt or wrong format/);
  });
});

describe('verdicts', () => {
  it('scores form a probability distribution', () => {
    const { samples } = loadDataset(path.join(tmp, 'data'));
    const verdict = classifyValues(outcome, samples[0].values, 32, 32);
    expect(verdict.scores).toHaveLength(2);
    const total = verdict.scores.reduce((a, b) => a + b, 0);
    expect(Math.abs(total - 1)).toBeLessThan(1e-6);
    for (const s of verdict.scores) expect(s).toBeGreaterThanOrEqual(0);
  });

  it('labels its own training images confidently', () => {
    const { samples } = loadDataset(path.join(tmp, 'data'));
    let correct = 0;
    for (const sample of samples) {
      if (classifyValues(outcome, sample.values, 32, 32).label === sample.label) correct++;
    }
    expect(correct / samples.length).toBeGreaterThanOrEqual(0.9);
  });
});
