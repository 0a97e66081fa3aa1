/** Training: minimize L1 on the raw waveforms of all channels with Adam.
 * Mixtures pair target and interference segments under random gains, so
 * region membership is the only cue separating the two sources.
 */

import * as tf from '@tensorflow/tfjs';
import { DemucsConfig, strideTotal } from './config';
import { Manifest, crop, loadManifest, sampleMixture } from './data';
import { DemucsModel, l1Loss } from './model';
import { Rng } from './rng';
import { WeightStore, initWeights } from './weights';

export interface TrainOptions {
  config: DemucsConfig;
  manifest: string;
  steps: number;
  batchSize?: number;
  learningRate?: number;
  seed?: number;
  cropSamples?: number;
  micIndices?: number[];
  nTargets?: number;
  nInterferers?: number;
  initStore?: WeightStore;
  maxSegmentsPerRegion?: number;
  fixedBatch?: boolean; // overfit mode: reuse the first sampled batch
  targetLoss?: number; // stop early once the running loss drops this far
  logEvery?: number;
}

export interface TrainResult {
  model: DemucsModel;
  store: WeightStore;
  lossCurve: number[];
}

function restrictManifest(manifest: Manifest, maxPerRegion: number, rng: Rng): Manifest {
  const pick = (entries: typeof manifest.targets) => {
    const idx = rng.choice(entries.length, Math.min(maxPerRegion, entries.length));
    return idx.sort((a, b) => a - b).map((i) => entries[i]);
  };
  return {
    ...manifest,
    targets: pick(manifest.targets),
    interference: pick(manifest.interference),
  };
}

function batchTensors(manifest: Manifest, rng: Rng, opts: Required<Pick<TrainOptions,
  'batchSize' | 'cropSamples' | 'nTargets' | 'nInterferers'>> &
  { micIndices?: number[] }, channels: number): { x: tf.Tensor3D; y: tf.Tensor3D } {
  const { batchSize, cropSamples } = opts;
  const xData = new Float32Array(batchSize * cropSamples * channels);
  const yData = new Float32Array(batchSize * cropSamples * channels);
  for (let b = 0; b < batchSize; b++) {
    const pair = crop(
      sampleMixture(manifest, rng, opts.nTargets, opts.nInterferers, opts.micIndices),
      cropSamples, rng,
    );
    for (let i = 0; i < cropSamples; i++) {
      for (let c = 0; c < channels; c++) {
        const at = b * cropSamples * channels + i * channels + c;
        xData[at] = pair.mixture[c][i];
        yData[at] = pair.reference[c][i];
      }
    }
  }
  return {
    x: tf.tensor3d(xData, [batchSize, cropSamples, channels]),
    y: tf.tensor3d(yData, [batchSize, cropSamples, channels]),
  };
}

export function trainModel(opts: TrainOptions): TrainResult {
  const cfg = opts.config;
  const seed = opts.seed ?? 0;
  const rng = new Rng(seed * 2654435761 + 1);
  let manifest = loadManifest(opts.manifest);
  if (!manifest.targets.length || !manifest.interference.length) {
    throw new Error('training manifest needs segments in both regions');
  }
  if (opts.maxSegmentsPerRegion) {
    manifest = restrictManifest(manifest, opts.maxSegmentsPerRegion, rng);
  }
  const micIndices = opts.micIndices;
  const channels = micIndices ? micIndices.length : cfg.channels;
  if (channels !== cfg.channels) {
    throw new Error(
      `config expects ${cfg.channels} channels but mic subset gives ${channels}`,
    );
  }
  const cropSamples = opts.cropSamples ?? 4 * strideTotal(cfg);
  const batchSize = opts.batchSize ?? 4;
  const store = opts.initStore ?? initWeights(cfg, seed);
  const model = new DemucsModel(store);
  const optimizer = tf.train.adam(opts.learningRate ?? 3e-4);
  const lossCurve: number[] = [];
  const vars = model.trainableVariables();
  let held: { x: tf.Tensor3D; y: tf.Tensor3D } | null = null;
  for (let step = 0; step < opts.steps; step++) {
    let batch: { x: tf.Tensor3D; y: tf.Tensor3D };
    if (opts.fixedBatch) {
      if (!held) {
        held = batchTensors(
          manifest, rng,
          { batchSize, cropSamples, nTargets: opts.nTargets ?? 1,
            nInterferers: opts.nInterferers ?? 1, micIndices },
          channels,
        );
      }
      batch = held;
    } else {
      batch = batchTensors(
        manifest, rng,
        { batchSize, cropSamples, nTargets: opts.nTargets ?? 1,
          nInterferers: opts.nInterferers ?? 1, micIndices },
        channels,
      );
    }
    const loss = optimizer.minimize(
      () => l1Loss(model.forward(batch.x), batch.y),
      true,
      vars,
    ) as tf.Scalar;
    const value = loss.dataSync()[0];
    lossCurve.push(value);
    loss.dispose();
    if (!opts.fixedBatch) {
      batch.x.dispose();
      batch.y.dispose();
    }
    if (opts.logEvery && step % opts.logEvery === 0) {
      console.log(`step ${step}: L1 ${value.toExponential(3)}`);
    }
    if (opts.targetLoss !== undefined && value <= opts.targetLoss) break;
  }
  if (held) {
    held.x.dispose();
    held.y.dispose();
  }
  optimizer.dispose();
  return { model, store: model.toStore(), lossCurve };
}

export interface FineTuneOptions extends Omit<TrainOptions, 'initStore' |
  'maxSegmentsPerRegion'> {
  fineTuneHours: number; // 1 h of audio = 1200 three-second segments
}

/** Continue training on an adaptation manifest under an audio-hour budget.
 * Budget 0 returns the base weights unchanged (bitwise).
 */
export function fineTune(base: WeightStore, opts: FineTuneOptions): TrainResult {
  if (base.config.channels !== opts.config.channels ||
      base.config.layers !== opts.config.layers ||
      base.config.hidden !== opts.config.hidden) {
    throw new Error('base weights are incompatible with the fine-tune config');
  }
  if (opts.fineTuneHours < 0) throw new Error('fineTuneHours must be >= 0');
  const clone: WeightStore = {
    config: base.config,
    tensors: new Map(
      Array.from(base.tensors, ([k, v]) => [
        k,
        { shape: v.shape.slice(), data: new Float32Array(v.data) },
      ]),
    ),
  };
  if (opts.fineTuneHours === 0) {
    return { model: new DemucsModel(clone), store: clone, lossCurve: [] };
  }
  const budgetSegments = Math.round(opts.fineTuneHours * 1200);
  const manifest = loadManifest(opts.manifest);
  const available = manifest.targets.length + manifest.interference.length;
  if (budgetSegments > available) {
    throw new Error(
      `budget of ${opts.fineTuneHours} h (${budgetSegments} segments) exceeds ` +
      `available data: ${available} segments = ${(available / 1200).toFixed(3)} h`,
    );
  }
  const perRegion = Math.max(1, Math.floor(budgetSegments / 2));
  return trainModel({
    ...opts,
    initStore: clone,
    maxSegmentsPerRegion: perRegion,
  });
}
