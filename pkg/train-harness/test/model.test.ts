import * as tf from '@tensorflow/tfjs';
import { describe, expect, it } from 'vitest';
import { makeConfig } from '../src/config';
import { DemucsModel, l1Loss } from '../src/model';
import { Rng } from '../src/rng';
import { initWeights } from '../src/weights';

const TINY = makeConfig({ channels: 2, layers: 2, hidden: 4 });

describe('model forward', () => {
  it('maps [B, T, C] to the same shape', () => {
    const model = new DemucsModel(initWeights(TINY, 0));
    for (const t of [16, 100, 1024, 4800]) {
      const x = tf.randomNormal([1, t, 2]) as tf.Tensor3D;
      const y = model.forward(x);
      expect(y.shape).toEqual([1, t, 2]);
      y.dispose();
      x.dispose();
    }
  });

  it('propagates zeros when biases are zero', () => {
    const store = initWeights(TINY, 1);
    for (const [name, t] of store.tensors) {
      if (name.includes('bias')) t.data.fill(0);
    }
    const model = new DemucsModel(store);
    const y = model.forward(tf.zeros([1, 256, 2]) as tf.Tensor3D);
    expect(Math.max(...Array.from(y.dataSync()).map(Math.abs))).toBe(0);
    y.dispose();
  });

  it('round-trips variables back into an identical store', () => {
    const store = initWeights(TINY, 2);
    const model = new DemucsModel(store);
    const back = model.toStore();
    for (const [name, t] of store.tensors) {
      expect(back.tensors.get(name)!.data).toEqual(t.data);
    }
  });

  it('L1 loss is zero at the target and positive elsewhere', () => {
    const a = tf.randomNormal([2, 64, 1]);
    expect(l1Loss(a, a).dataSync()[0]).toBe(0);
    const b = tf.add(a, 0.5);
    expect(l1Loss(b as tf.Tensor3D, a).dataSync()[0]).toBeCloseTo(0.5, 5);
  });
});

describe('gradients', () => {
  it('matches central finite differences on the first conv layer', () => {
    // micro config: one layer, two hidden channels, mono, 64 samples
    const cfg = makeConfig({
      channels: 1, layers: 1, hidden: 2, kernel: 8, stride: 4, lstm_layers: 1,
      normalize_input: false,
    });
    const model = new DemucsModel(initWeights(cfg, 3));
    const rng = new Rng(99);
    const x = tf.tensor3d(Array.from(rng.normals(64)), [1, 64, 1]);
    const target = tf.tensor3d(Array.from(rng.normals(64)), [1, 64, 1]);
    const lossFn = () => l1Loss(model.forward(x, false), target) as tf.Scalar;
    const w = model.enc[0].w;
    const { grads } = tf.variableGrads(lossFn, [w]);
    const analytic = grads[w.name].dataSync();
    const data = new Float32Array(w.dataSync());
    const lossAt = (values: Float32Array) => {
      w.assign(tf.tensor(Array.from(values), w.shape as number[]));
      const l = lossFn();
      const v = l.dataSync()[0];
      l.dispose();
      return v;
    };
    // probe the highest-gradient entries; epsilon large enough to rise
    // above float32 loss granularity
    const order = Array.from(analytic.keys()).sort(
      (a, b) => Math.abs(analytic[b]) - Math.abs(analytic[a]),
    );
    let checked = 0;
    for (const idx of order.slice(0, 6)) {
      const g = analytic[idx];
      if (Math.abs(g) < 1e-3) continue;
      const eps = Math.max(0.02 * Math.abs(data[idx]), 0.005);
      const plus = new Float32Array(data);
      plus[idx] += eps;
      const minus = new Float32Array(data);
      minus[idx] -= eps;
      const fd = (lossAt(plus) - lossAt(minus)) / (2 * eps);
      expect(Math.abs(fd - g) / Math.abs(g)).toBeLessThan(1e-3);
      checked += 1;
    }
    lossAt(data); // restore
    expect(checked).toBeGreaterThanOrEqual(3);
  });
});
