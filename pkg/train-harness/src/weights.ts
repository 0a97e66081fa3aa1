/** SDWX weight files: the binary interchange format with the engine.
 *
 * Layout (little-endian): magic "SDWX" | u32 version=1 | u64 header byte
 * length | UTF-8 JSON header {config, tensors: [{name, dtype: "f32",
 * shape, byte_offset}]} | contiguous row-major float32 payloads in table
 * order, offsets relative to the payload start.
 */

import * as fs from 'fs';
import { DemucsConfig, expectedTensors, lstmWidth, makeConfig } from './config';
import { Rng } from './rng';

export const MAGIC = 'SDWX';
export const FORMAT_VERSION = 1;

export interface WeightStore {
  config: DemucsConfig;
  tensors: Map<string, { shape: number[]; data: Float32Array }>;
}

export function validateStore(store: WeightStore): void {
  const expected = expectedTensors(store.config);
  const seen = new Set<string>();
  for (const spec of expected) {
    const t = store.tensors.get(spec.name);
    if (!t) throw new Error(`missing tensor ${spec.name}`);
    if (t.shape.join(',') !== spec.shape.join(',')) {
      throw new Error(
        `tensor ${spec.name} has shape [${t.shape}], expected [${spec.shape}]`,
      );
    }
    const count = spec.shape.reduce((a, b) => a * b, 1);
    if (t.data.length !== count) {
      throw new Error(`tensor ${spec.name} has ${t.data.length} values, expected ${count}`);
    }
    seen.add(spec.name);
  }
  for (const name of store.tensors.keys()) {
    if (!seen.has(name)) throw new Error(`unexpected tensor ${name}`);
  }
}

/** Seeded uniform(-k, k) init with k = 1/sqrt(fan_in), as in the engine. */
export function initWeights(cfg: DemucsConfig, seed: number): WeightStore {
  const rng = new Rng(seed);
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  const w = lstmWidth(cfg);
  for (const spec of expectedTensors(cfg)) {
    let k: number;
    if (spec.name.startsWith('lstm')) {
      k = 1 / Math.sqrt(w);
    } else if (spec.name.includes('convt')) {
      const wshape = expectedTensors(cfg).find(
        (s) => s.name === spec.name.replace('.bias', '.weight'),
      )!.shape;
      k = 1 / Math.sqrt(wshape[0] * cfg.kernel);
    } else {
      const wshape = expectedTensors(cfg).find(
        (s) => s.name === spec.name.replace('.bias', '.weight'),
      )!.shape;
      k = 1 / Math.sqrt(wshape[1] * (wshape.length === 3 ? wshape[2] : 1));
    }
    const count = spec.shape.reduce((a, b) => a * b, 1);
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) data[i] = rng.uniform(-k, k);
    tensors.set(spec.name, { shape: spec.shape.slice(), data });
  }
  return { config: cfg, tensors };
}

export function saveWeights(store: WeightStore, path: string): void {
  validateStore(store);
  const order = expectedTensors(store.config);
  const table: { name: string; dtype: string; shape: number[]; byte_offset: number }[] = [];
  let offset = 0;
  for (const spec of order) {
    const t = store.tensors.get(spec.name)!;
    for (let i = 0; i < t.data.length; i++) {
      if (!Number.isFinite(t.data[i])) {
        throw new Error(`tensor ${spec.name} contains non-finite values`);
      }
    }
    table.push({ name: spec.name, dtype: 'f32', shape: t.shape, byte_offset: offset });
    offset += t.data.length * 4;
  }
  const header = Buffer.from(
    JSON.stringify({ config: store.config, tensors: table }),
    'utf-8',
  );
  const head = Buffer.alloc(16);
  head.write(MAGIC, 0, 'ascii');
  head.writeUInt32LE(FORMAT_VERSION, 4);
  head.writeBigUInt64LE(BigInt(header.length), 8);
  const payload = Buffer.alloc(offset);
  for (const entry of table) {
    const t = store.tensors.get(entry.name)!;
    Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength).copy(
      payload,
      entry.byte_offset,
    );
  }
  fs.writeFileSync(path, Buffer.concat([head, header, payload]));
}

export function loadWeights(path: string): WeightStore {
  const buf = fs.readFileSync(path);
  if (buf.subarray(0, 4).toString('ascii') !== MAGIC) {
    throw new Error(`${path}: not a weight file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== FORMAT_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const hlen = Number(buf.readBigUInt64LE(8));
  const header = JSON.parse(buf.subarray(16, 16 + hlen).toString('utf-8'));
  const payload = buf.subarray(16 + hlen);
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  for (const entry of header.tensors) {
    const count = entry.shape.reduce((a: number, b: number) => a * b, 1);
    const start = entry.byte_offset;
    const slice = payload.subarray(start, start + 4 * count);
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) data[i] = slice.readFloatLE(4 * i);
    tensors.set(entry.name, { shape: entry.shape, data });
  }
  const store = { config: makeConfig(header.config), tensors };
  validateStore(store);
  return store;
}

/** Format lint: header parses and the payload is contiguous and gap-free. */
export function lintWeightFile(path: string): void {
  const buf = fs.readFileSync(path);
  if (buf.subarray(0, 4).toString('ascii') !== MAGIC) {
    throw new Error('bad magic');
  }
  const hlen = Number(buf.readBigUInt64LE(8));
  const header = JSON.parse(buf.subarray(16, 16 + hlen).toString('utf-8'));
  let offset = 0;
  for (const entry of header.tensors) {
    if (entry.byte_offset !== offset) {
      throw new Error(
        `tensor ${entry.name} at byte ${entry.byte_offset}, expected ${offset}`,
      );
    }
    if (entry.dtype !== 'f32') throw new Error(`tensor ${entry.name}: dtype ${entry.dtype}`);
    offset += 4 * entry.shape.reduce((a: number, b: number) => a * b, 1);
  }
  if (buf.length !== 16 + hlen + offset) {
    throw new Error(`file has ${buf.length} bytes, expected ${16 + hlen + offset}`);
  }
}
