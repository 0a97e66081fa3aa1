import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { describe, expect, it } from 'vitest';
import { makeConfig } from '../src/config';
import { fineTune, trainModel } from '../src/train';
import { initWeights } from '../src/weights';
import { writeTestManifest } from './data.test';

const TINY = makeConfig({ channels: 2, layers: 2, hidden: 4 });

function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), 'train-'));
}

describe('training', () => {
  it('overfits a single batch: L1 drops by >= 90% within 500 steps', () => {
    const manifest = writeTestManifest(tmpDir(), 2, 4800, 11);
    const t0 = Date.now();
    const result = trainModel({
      config: TINY,
      manifest,
      steps: 500,
      batchSize: 1,
      cropSamples: 2048,
      seed: 1,
      fixedBatch: true,
      learningRate: 3e-4,
      targetLoss: undefined,
    });
    const first = result.lossCurve[0];
    const last = result.lossCurve[result.lossCurve.length - 1];
    expect(result.lossCurve.length).toBeLessThanOrEqual(500);
    expect(last).toBeLessThanOrEqual(0.1 * first);
    expect(Date.now() - t0).toBeLessThan(5 * 60 * 1000);
  }, 360_000);

  it('training is deterministic given the seed', () => {
    const manifest = writeTestManifest(tmpDir(), 2, 4800, 12);
    const opts = {
      config: TINY, manifest, steps: 5, batchSize: 1, cropSamples: 1024,
      seed: 3,
    };
    const a = trainModel(opts);
    const b = trainModel(opts);
    expect(a.lossCurve).toEqual(b.lossCurve);
    for (const [name, t] of a.store.tensors) {
      expect(b.store.tensors.get(name)!.data).toEqual(t.data);
    }
  });

  it('rejects manifests missing a region', () => {
    const dir = tmpDir();
    const manifest = path.join(dir, 'm.jsonl');
    fs.writeFileSync(
      manifest,
      JSON.stringify({ type: 'header', schema_version: 1, sample_rate: 48000 }) + '\n',
    );
    expect(() =>
      trainModel({ config: TINY, manifest, steps: 1 }),
    ).toThrow(/both regions/);
  });
});

describe('fine-tuning', () => {
  it('budget 0 returns the base weights bitwise', () => {
    const manifest = writeTestManifest(tmpDir(), 2, 4800, 13);
    const base = initWeights(TINY, 5);
    const tuned = fineTune(base, {
      config: TINY, manifest, steps: 10, fineTuneHours: 0,
    });
    for (const [name, t] of base.tensors) {
      expect(tuned.store.tensors.get(name)!.data).toEqual(t.data);
    }
    expect(tuned.lossCurve).toEqual([]);
  });

  it('a nonzero budget changes the weights', () => {
    const manifest = writeTestManifest(tmpDir(), 3, 4800, 14);
    const base = initWeights(TINY, 6);
    const tuned = fineTune(base, {
      config: TINY, manifest, steps: 3, batchSize: 1, cropSamples: 1024,
      fineTuneHours: 4 / 1200, seed: 2,
    });
    const before = base.tensors.get('encoder.0.conv.weight')!.data;
    const after = tuned.store.tensors.get('encoder.0.conv.weight')!.data;
    expect(after).not.toEqual(before);
  });

  it('rejects budgets beyond the available audio, listing hours', () => {
    const manifest = writeTestManifest(tmpDir(), 2, 4800, 15);
    const base = initWeights(TINY, 7);
    expect(() =>
      fineTune(base, { config: TINY, manifest, steps: 1, fineTuneHours: 1 }),
    ).toThrow(/available data: 4 segments = 0.003 h/);
  });

  it('rejects incompatible base weights', () => {
    const manifest = writeTestManifest(tmpDir(), 2, 4800, 16);
    const other = makeConfig({ channels: 2, layers: 3, hidden: 4 });
    expect(() =>
      fineTune(initWeights(other, 1), {
        config: TINY, manifest, steps: 1, fineTuneHours: 0,
      }),
    ).toThrow(/incompatible/);
  });
});
