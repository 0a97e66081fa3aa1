/** Command line: fixture export, training, and quick evaluation.
 *
 *   node dist/cli.js fixtures --out DIR
 *   node dist/cli.js train --manifest M.jsonl --out weights.sdwx [options]
 *   node dist/cli.js evaluate --manifest M.jsonl --weights W.sdwx [options]
 */

import { makeConfig } from './config';
import { loadManifest, sampleMixture } from './data';
import { DemucsModel } from './model';
import { siSdrImprovement } from './metrics';
import { exportParityPack, forwardPlanar } from './parity';
import { Rng } from './rng';
import { trainModel } from './train';
import { loadWeights, saveWeights } from './weights';

function parseArgs(argv: string[]): Record<string, string | boolean> {
  const out: Record<string, string | boolean> = {};
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (!a.startsWith('--')) continue;
    const key = a.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith('--')) {
      out[key] = argv[++i];
    } else {
      out[key] = true;
    }
  }
  return out;
}

function num(args: Record<string, string | boolean>, key: string, dflt: number): number {
  return key in args ? Number(args[key]) : dflt;
}

function cmdFixtures(args: Record<string, string | boolean>): void {
  const out = String(args.out ?? '../tests/fixtures/parity');
  const tiny = makeConfig({
    channels: 2, layers: 2, hidden: 4, kernel: 8, stride: 4,
  });
  const mono = makeConfig({
    channels: 1, layers: 2, hidden: 4, kernel: 8, stride: 4,
  });
  const packs = [
    exportParityPack(tiny, 1234, out, 'tiny'),
    exportParityPack(mono, 4321, out, 'mono'),
  ];
  for (const p of packs) {
    console.log(`wrote ${p.weightsPath}, ${p.fixturePath}, ${p.tamperedPath}`);
  }
}

function cmdTrain(args: Record<string, string | boolean>): void {
  const cfg = makeConfig({
    channels: num(args, 'channels', 2),
    layers: num(args, 'layers', 3),
    hidden: num(args, 'hidden', 8),
    kernel: num(args, 'kernel', 8),
    stride: num(args, 'stride', 4),
  });
  const mics = args.mics
    ? String(args.mics).split(',').map(Number)
    : undefined;
  const result = trainModel({
    config: cfg,
    manifest: String(args.manifest),
    steps: num(args, 'steps', 1000),
    batchSize: num(args, 'batch', 4),
    learningRate: num(args, 'lr', 3e-4),
    seed: num(args, 'seed', 0),
    cropSamples: num(args, 'crop', 6144),
    micIndices: mics,
    logEvery: num(args, 'log-every', 50),
  });
  saveWeights(result.store, String(args.out));
  const last = result.lossCurve.slice(-20);
  console.log(
    `trained ${result.lossCurve.length} steps; ` +
    `final L1 ${(last.reduce((a, b) => a + b, 0) / last.length).toExponential(3)}; ` +
    `wrote ${args.out}`,
  );
}

function cmdEvaluate(args: Record<string, string | boolean>): void {
  const manifest = loadManifest(String(args.manifest));
  const store = loadWeights(String(args.weights));
  const model = new DemucsModel(store);
  const mics = args.mics
    ? String(args.mics).split(',').map(Number)
    : undefined;
  const n = num(args, 'n', 20);
  const rng = new Rng(num(args, 'seed', 99));
  let total = 0;
  for (let k = 0; k < n; k++) {
    const mix = sampleMixture(manifest, rng, 1, 1, mics);
    const channels = mix.mixture.length;
    const samples = mix.mixture[0].length;
    const flat = new Float32Array(channels * samples);
    for (let c = 0; c < channels; c++) flat.set(mix.mixture[c], c * samples);
    const est = forwardPlanar(model, flat, channels, samples);
    total += siSdrImprovement(
      mix.mixture[0], est.subarray(0, samples), mix.reference[0],
    );
  }
  console.log(`mean SI-SDRi over ${n} mixtures: ${(total / n).toFixed(2)} dB`);
}

function main(): void {
  const [cmd, ...rest] = process.argv.slice(2);
  const args = parseArgs(rest);
  if (cmd === 'fixtures') cmdFixtures(args);
  else if (cmd === 'train') cmdTrain(args);
  else if (cmd === 'evaluate') cmdEvaluate(args);
  else {
    console.error('usage: cli.js fixtures|train|evaluate [--options]');
    process.exitCode = 2;
  }
}

main();
