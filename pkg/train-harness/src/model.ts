/** Trainable model mirroring the inference engine's forward semantics:
 * left-padded strided GLU convolutions, a 2-layer LSTM bottleneck, summed
 * skip connections, transposed convolutions back up, optional global-std
 * input normalization. Tensors flow as [batch, time, channels].
 */

import * as tf from '@tensorflow/tfjs';
import { DemucsConfig, expectedTensors, lstmWidth, widths } from './config';
import { WeightStore, validateStore } from './weights';

const NORM_EPS = 1e-3;

interface EncLayer {
  w: tf.Variable; // [K, Cin, Cout]
  b: tf.Variable;
  we: tf.Variable; // [1, Cout, 2*Cout]
  be: tf.Variable;
}

interface LstmLayer {
  wih: tf.Variable; // [W, 4W]
  whh: tf.Variable; // [W, 4W]
  bih: tf.Variable;
  bhh: tf.Variable;
}

interface DecLayer {
  we: tf.Variable; // [1, Cw, 2*Cw]
  be: tf.Variable;
  wt: tf.Variable; // [1, K, Cout, Cw] (conv2dTranspose filter)
  bt: tf.Variable;
}

function glu(x: tf.Tensor3D): tf.Tensor3D {
  const half = x.shape[2] / 2;
  const a = x.slice([0, 0, 0], [-1, -1, half]);
  const b = x.slice([0, 0, half], [-1, -1, half]);
  return tf.mul(a, tf.sigmoid(b));
}

export class DemucsModel {
  readonly config: DemucsConfig;
  enc: EncLayer[] = [];
  lstm: LstmLayer[] = [];
  dec: DecLayer[] = [];

  constructor(store: WeightStore) {
    validateStore(store);
    this.config = store.config;
    const get = (name: string) => {
      const t = store.tensors.get(name)!;
      return tf.tensor(Array.from(t.data), t.shape, 'float32');
    };
    const cfg = this.config;
    tf.tidy(() => {
      for (let i = 0; i < cfg.layers; i++) {
        this.enc.push({
          w: tf.variable(get(`encoder.${i}.conv.weight`).transpose([2, 1, 0])),
          b: tf.variable(get(`encoder.${i}.conv.bias`)),
          we: tf.variable(get(`encoder.${i}.expand.weight`).transpose([2, 1, 0])),
          be: tf.variable(get(`encoder.${i}.expand.bias`)),
        });
      }
      for (let j = 0; j < cfg.lstm_layers; j++) {
        this.lstm.push({
          wih: tf.variable(get(`lstm.${j}.weight_ih`).transpose()),
          whh: tf.variable(get(`lstm.${j}.weight_hh`).transpose()),
          bih: tf.variable(get(`lstm.${j}.bias_ih`)),
          bhh: tf.variable(get(`lstm.${j}.bias_hh`)),
        });
      }
      for (let i = 0; i < cfg.layers; i++) {
        this.dec.push({
          we: tf.variable(get(`decoder.${i}.expand.weight`).transpose([2, 1, 0])),
          be: tf.variable(get(`decoder.${i}.expand.bias`)),
          wt: tf.variable(
            get(`decoder.${i}.convt.weight`).transpose([2, 1, 0]).expandDims(0),
          ),
          bt: tf.variable(get(`decoder.${i}.convt.bias`)),
        });
      }
      return tf.scalar(0); // tidy wants a return; variables survive tidy
    });
  }

  trainableVariables(): tf.Variable[] {
    const vars: tf.Variable[] = [];
    for (const l of this.enc) vars.push(l.w, l.b, l.we, l.be);
    for (const l of this.lstm) vars.push(l.wih, l.whh, l.bih, l.bhh);
    for (const l of this.dec) vars.push(l.we, l.be, l.wt, l.bt);
    return vars;
  }

  /** Read the variables back into engine layout (row-major float32). */
  toStore(): WeightStore {
    const cfg = this.config;
    const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
    const put = (name: string, t: tf.Tensor) => {
      const spec = expectedTensors(cfg).find((s) => s.name === name)!;
      tensors.set(name, {
        shape: spec.shape.slice(),
        data: new Float32Array(t.dataSync()),
      });
      t.dispose();
    };
    for (let i = 0; i < cfg.layers; i++) {
      put(`encoder.${i}.conv.weight`, this.enc[i].w.transpose([2, 1, 0]));
      put(`encoder.${i}.conv.bias`, this.enc[i].b.clone());
      put(`encoder.${i}.expand.weight`, this.enc[i].we.transpose([2, 1, 0]));
      put(`encoder.${i}.expand.bias`, this.enc[i].be.clone());
    }
    for (let j = 0; j < cfg.lstm_layers; j++) {
      put(`lstm.${j}.weight_ih`, this.lstm[j].wih.transpose());
      put(`lstm.${j}.weight_hh`, this.lstm[j].whh.transpose());
      put(`lstm.${j}.bias_ih`, this.lstm[j].bih.clone());
      put(`lstm.${j}.bias_hh`, this.lstm[j].bhh.clone());
    }
    for (let i = 0; i < cfg.layers; i++) {
      put(
        `decoder.${i}.convt.weight`,
        this.dec[i].wt.squeeze([0]).transpose([2, 1, 0]),
      );
      put(`decoder.${i}.convt.bias`, this.dec[i].bt.clone());
      put(`decoder.${i}.expand.weight`, this.dec[i].we.transpose([2, 1, 0]));
      put(`decoder.${i}.expand.bias`, this.dec[i].be.clone());
    }
    const store = { config: cfg, tensors };
    validateStore(store);
    return store;
  }

  private runLstm(x: tf.Tensor3D): tf.Tensor3D {
    const w = lstmWidth(this.config);
    const [batch, frames] = [x.shape[0], x.shape[1]];
    let cur = x;
    for (const layer of this.lstm) {
      // both biases are per-step constants; fold them into the projection
      const pre = tf.add(
        tf.matMul(cur.reshape([batch * frames, w]), layer.wih),
        tf.add(layer.bih, layer.bhh),
      ).reshape([batch, frames, 4 * w]);
      let h = tf.zeros([batch, w]) as tf.Tensor2D;
      let c = tf.zeros([batch, w]) as tf.Tensor2D;
      const outs: tf.Tensor2D[] = [];
      for (let t = 0; t < frames; t++) {
        const z = tf.add(
          pre.slice([0, t, 0], [batch, 1, 4 * w]).reshape([batch, 4 * w]),
          tf.matMul(h, layer.whh),
        );
        const i = tf.sigmoid(z.slice([0, 0], [batch, w]));
        const f = tf.sigmoid(z.slice([0, w], [batch, w]));
        const g = tf.tanh(z.slice([0, 2 * w], [batch, w]));
        const o = tf.sigmoid(z.slice([0, 3 * w], [batch, w]));
        c = tf.add(tf.mul(f, c), tf.mul(i, g)) as tf.Tensor2D;
        h = tf.mul(o, tf.tanh(c)) as tf.Tensor2D;
        outs.push(h);
      }
      cur = tf.stack(outs, 1) as tf.Tensor3D;
    }
    return cur;
  }

  /** Forward pass on [batch, time, channels]; output has the same shape. */
  forward(x: tf.Tensor3D, normalize?: boolean): tf.Tensor3D {
    const cfg = this.config;
    if (x.shape[2] !== cfg.channels) {
      throw new Error(`expected ${cfg.channels} channels, got ${x.shape[2]}`);
    }
    const t = x.shape[1];
    const doNorm = normalize ?? cfg.normalize_input;
    return tf.tidy(() => {
      let scale: tf.Tensor | null = null;
      let h = x;
      if (doNorm) {
        const { variance } = tf.moments(x);
        scale = tf.add(tf.sqrt(variance), NORM_EPS);
        h = tf.div(h, scale) as tf.Tensor3D;
      }
      const counts: number[] = [t];
      for (let i = 0; i < cfg.layers; i++) {
        counts.push(Math.floor(counts[i] / cfg.stride));
      }
      const skips: tf.Tensor3D[] = [];
      for (let i = 0; i < cfg.layers; i++) {
        const padded = tf.pad(h, [[0, 0], [cfg.kernel - cfg.stride, 0], [0, 0]]);
        let z = tf.conv1d(
          padded as tf.Tensor3D, this.enc[i].w as unknown as tf.Tensor3D,
          cfg.stride, 'valid',
        );
        z = tf.relu(tf.add(z, this.enc[i].b)) as tf.Tensor3D;
        z = tf.add(
          tf.conv1d(z, this.enc[i].we as unknown as tf.Tensor3D, 1, 'valid'),
          this.enc[i].be,
        ) as tf.Tensor3D;
        h = glu(z);
        skips.push(h);
      }
      h = this.runLstm(h);
      for (let i = cfg.layers - 1; i >= 0; i--) {
        h = tf.add(h, skips[i]) as tf.Tensor3D;
        h = glu(
          tf.add(
            tf.conv1d(h, this.dec[i].we as unknown as tf.Tensor3D, 1, 'valid'),
            this.dec[i].be,
          ) as tf.Tensor3D,
        );
        const frames = h.shape[1];
        const cw = h.shape[2];
        const cout = i === 0 ? cfg.channels : widths(cfg)[i - 1];
        const fullLen = (frames - 1) * cfg.stride + cfg.kernel;
        const up4 = tf.conv2dTranspose(
          h.reshape([h.shape[0], 1, frames, cw]) as tf.Tensor4D,
          this.dec[i].wt as unknown as tf.Tensor4D,
          [h.shape[0], 1, fullLen, cout],
          [1, cfg.stride],
          'valid',
        );
        let up = up4.reshape([h.shape[0], fullLen, cout]) as tf.Tensor3D;
        const target = counts[i];
        if (fullLen >= target) {
          up = up.slice([0, 0, 0], [-1, target, -1]);
        } else {
          up = tf.pad(up, [[0, 0], [0, target - fullLen], [0, 0]]) as tf.Tensor3D;
        }
        h = tf.add(up, this.dec[i].bt) as tf.Tensor3D;
        if (i > 0) h = tf.relu(h);
      }
      if (scale !== null) h = tf.mul(h, scale) as tf.Tensor3D;
      return h;
    });
  }
}

/** Mean absolute error over every channel and sample. */
export function l1Loss(pred: tf.Tensor, target: tf.Tensor): tf.Scalar {
  return tf.mean(tf.abs(tf.sub(pred, target)));
}
