/** Cross-implementation parity fixtures.
 *
 * Same framing as the weight format: magic "SDPV" | u32 version | u64
 * header length | JSON header {config, tolerance, tensors: [{name:
 * "input"/"output", dtype "f32", shape, byte_offset}]} | float32 payload.
 * The inference engine replays the input through the exported weights and
 * must match the stored output within the stated tolerance.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { DemucsConfig } from './config';
import { DemucsModel } from './model';
import { Rng } from './rng';
import { WeightStore, initWeights, saveWeights } from './weights';

export const PARITY_MAGIC = 'SDPV';
export const PARITY_VERSION = 1;
export const PARITY_TOLERANCE = 1e-4;
export const PARITY_SAMPLES = 4800;

export interface ParityFixture {
  config: DemucsConfig;
  tolerance: number;
  input: { shape: number[]; data: Float32Array };
  output: { shape: number[]; data: Float32Array };
}

export function writeParityFixture(filePath: string, fixture: ParityFixture): void {
  const entries = [
    { name: 'input', t: fixture.input },
    { name: 'output', t: fixture.output },
  ];
  const table: object[] = [];
  let offset = 0;
  for (const { name, t } of entries) {
    table.push({ name, dtype: 'f32', shape: t.shape, byte_offset: offset });
    offset += 4 * t.data.length;
  }
  const header = Buffer.from(
    JSON.stringify({
      config: fixture.config,
      tolerance: fixture.tolerance,
      tensors: table,
    }),
    'utf-8',
  );
  const head = Buffer.alloc(16);
  head.write(PARITY_MAGIC, 0, 'ascii');
  head.writeUInt32LE(PARITY_VERSION, 4);
  head.writeBigUInt64LE(BigInt(header.length), 8);
  const payload = Buffer.alloc(offset);
  entries.forEach(({ t }, k) => {
    Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength).copy(
      payload,
      (table[k] as { byte_offset: number }).byte_offset,
    );
  });
  fs.writeFileSync(filePath, Buffer.concat([head, header, payload]));
}

export function readParityFixture(filePath: string): ParityFixture {
  const buf = fs.readFileSync(filePath);
  if (buf.subarray(0, 4).toString('ascii') !== PARITY_MAGIC) {
    throw new Error(`${filePath}: not a parity fixture`);
  }
  if (buf.readUInt32LE(4) !== PARITY_VERSION) {
    throw new Error(`${filePath}: unsupported version`);
  }
  const hlen = Number(buf.readBigUInt64LE(8));
  const header = JSON.parse(buf.subarray(16, 16 + hlen).toString('utf-8'));
  const payload = buf.subarray(16 + hlen);
  const read = (name: string) => {
    const entry = header.tensors.find((t: { name: string }) => t.name === name);
    const count = entry.shape.reduce((a: number, b: number) => a * b, 1);
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      data[i] = payload.readFloatLE(entry.byte_offset + 4 * i);
    }
    return { shape: entry.shape, data };
  };
  return {
    config: header.config,
    tolerance: header.tolerance,
    input: read('input'),
    output: read('output'),
  };
}

/** Forward a (C, T) row-major buffer through the model. */
export function forwardPlanar(model: DemucsModel, input: Float32Array,
                              channels: number, samples: number): Float32Array {
  const x = tf.tidy(() =>
    tf.tensor2d(input, [channels, samples]).transpose().expandDims(0),
  ) as tf.Tensor3D;
  const y = model.forward(x);
  const out = tf.tidy(() => y.squeeze([0]).transpose());
  const data = new Float32Array(out.dataSync());
  x.dispose();
  y.dispose();
  out.dispose();
  return data;
}

export interface ParityPack {
  weightsPath: string;
  fixturePath: string;
  tamperedPath: string;
}

/** Export weights + fixture (+ a tampered negative control) for one config. */
export function exportParityPack(cfg: DemucsConfig, seed: number, outDir: string,
                                 name: string): ParityPack {
  fs.mkdirSync(outDir, { recursive: true });
  const store: WeightStore = initWeights(cfg, seed);
  const weightsPath = path.join(outDir, `${name}.sdwx`);
  saveWeights(store, weightsPath);
  const model = new DemucsModel(store);
  const rng = new Rng(seed + 7919);
  const input = rng.normals(cfg.channels * PARITY_SAMPLES);
  const output = forwardPlanar(model, input, cfg.channels, PARITY_SAMPLES);

  // replay must be exact within this process before anything is published
  const replay = forwardPlanar(model, input, cfg.channels, PARITY_SAMPLES);
  for (let i = 0; i < output.length; i++) {
    if (output[i] !== replay[i]) {
      throw new Error('parity fixture replay mismatch inside the harness');
    }
  }

  const fixture: ParityFixture = {
    config: cfg,
    tolerance: PARITY_TOLERANCE,
    input: { shape: [cfg.channels, PARITY_SAMPLES], data: input },
    output: { shape: [cfg.channels, PARITY_SAMPLES], data: output },
  };
  const fixturePath = path.join(outDir, `${name}.sdpv`);
  writeParityFixture(fixturePath, fixture);

  const tampered = new Float32Array(output);
  for (let i = 0; i < tampered.length; i += 97) tampered[i] += 0.5;
  const tamperedPath = path.join(outDir, `${name}_tampered.sdpv`);
  writeParityFixture(tamperedPath, { ...fixture, output: { shape: [cfg.channels, PARITY_SAMPLES], data: tampered } });
  return { weightsPath, fixturePath, tamperedPath };
}
