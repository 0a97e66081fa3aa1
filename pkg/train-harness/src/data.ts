/** Segment manifests (JSON-lines, written by the simulator pipeline) and
 * mixture construction with the same semantics as the dataset builder:
 * per-segment gains uniform in [-5, +5] dB, joint peak normalization of
 * mixture and reference when the mixture would clip.
 */

import * as fs from 'fs';
import * as path from 'path';
import { Rng } from './rng';
import { readWav } from './wav';

export interface SegmentEntry {
  segment_id: string;
  region: 'target' | 'interference';
  audio_path: string;
  sample_rate: number;
}

export interface Manifest {
  dir: string;
  sampleRate: number;
  targets: SegmentEntry[];
  interference: SegmentEntry[];
}

export function loadManifest(manifestPath: string): Manifest {
  const lines = fs
    .readFileSync(manifestPath, 'utf-8')
    .split('\n')
    .filter((l) => l.trim().length > 0)
    .map((l) => JSON.parse(l));
  if (!lines.length || lines[0].type !== 'header') {
    throw new Error(`${manifestPath}: missing manifest header`);
  }
  const targets: SegmentEntry[] = [];
  const interference: SegmentEntry[] = [];
  for (const line of lines.slice(1)) {
    if (line.type !== 'segment') continue;
    const entry: SegmentEntry = {
      segment_id: line.segment_id,
      region: line.region,
      audio_path: line.audio_path,
      sample_rate: line.sample_rate,
    };
    (line.region === 'target' ? targets : interference).push(entry);
  }
  return {
    dir: path.dirname(path.resolve(manifestPath)),
    sampleRate: lines[0].sample_rate,
    targets,
    interference,
  };
}

const audioCache = new Map<string, Float32Array[]>();

export function segmentAudio(manifest: Manifest, entry: SegmentEntry,
                             micIndices?: number[]): Float32Array[] {
  const full = path.join(manifest.dir, entry.audio_path);
  let channels = audioCache.get(full);
  if (!channels) {
    channels = readWav(full).channels;
    audioCache.set(full, channels);
  }
  return micIndices ? micIndices.map((i) => channels![i]) : channels;
}

export interface MixturePair {
  mixture: Float32Array[];
  reference: Float32Array[];
}

/** mixture = sum(gains * targets) + sum(gains * interference);
 * reference keeps all channels of the gained target sum. */
export function makeMixture(targetStems: Float32Array[][],
                            interferenceStems: Float32Array[][],
                            gainsDb: number[]): MixturePair {
  if (!targetStems.length) throw new Error('mixture needs at least one target');
  if (!interferenceStems.length) throw new Error('mixture needs at least one interferer');
  const stems = [...targetStems, ...interferenceStems];
  if (gainsDb.length !== stems.length) {
    throw new Error(`need ${stems.length} gains, got ${gainsDb.length}`);
  }
  const nCh = stems[0].length;
  const n = stems[0][0].length;
  const reference = Array.from({ length: nCh }, () => new Float32Array(n));
  const mixture = Array.from({ length: nCh }, () => new Float32Array(n));
  stems.forEach((stem, k) => {
    if (stem.length !== nCh || stem[0].length !== n) {
      throw new Error('mixture stems disagree in shape');
    }
    const scale = 10 ** (gainsDb[k] / 20);
    const isTarget = k < targetStems.length;
    for (let c = 0; c < nCh; c++) {
      const dst = mixture[c];
      const refDst = reference[c];
      const src = stem[c];
      for (let i = 0; i < n; i++) {
        const v = scale * src[i];
        dst[i] += v;
        if (isTarget) refDst[i] += v;
      }
    }
  });
  let peak = 0;
  for (const ch of mixture) for (const v of ch) peak = Math.max(peak, Math.abs(v));
  if (peak > 1.0) {
    for (const arr of [...mixture, ...reference]) {
      for (let i = 0; i < n; i++) arr[i] /= peak;
    }
  }
  return { mixture, reference };
}

export interface SampledMixture extends MixturePair {
  targetIds: string[];
  interferenceIds: string[];
}

export function sampleMixture(manifest: Manifest, rng: Rng, nTargets = 1,
                              nInterferers = 1, micIndices?: number[]): SampledMixture {
  if (manifest.targets.length < nTargets) {
    throw new Error(`need ${nTargets} targets, pool has ${manifest.targets.length}`);
  }
  if (manifest.interference.length < nInterferers) {
    throw new Error(
      `need ${nInterferers} interferers, pool has ${manifest.interference.length}`,
    );
  }
  const tIdx = rng.choice(manifest.targets.length, nTargets);
  const iIdx = rng.choice(manifest.interference.length, nInterferers);
  const tStems = tIdx.map((i) => segmentAudio(manifest, manifest.targets[i], micIndices));
  const iStems = iIdx.map((i) =>
    segmentAudio(manifest, manifest.interference[i], micIndices),
  );
  const gains = Array.from({ length: nTargets + nInterferers }, () =>
    rng.uniform(-5, 5),
  );
  return {
    ...makeMixture(tStems, iStems, gains),
    targetIds: tIdx.map((i) => manifest.targets[i].segment_id),
    interferenceIds: iIdx.map((i) => manifest.interference[i].segment_id),
  };
}

/** Random crop of matching mixture/reference windows. */
export function crop(pair: MixturePair, length: number, rng: Rng): MixturePair {
  const n = pair.mixture[0].length;
  if (length >= n) return pair;
  const start = rng.int(n - length);
  return {
    mixture: pair.mixture.map((c) => c.subarray(start, start + length)),
    reference: pair.reference.map((c) => c.subarray(start, start + length)),
  };
}
