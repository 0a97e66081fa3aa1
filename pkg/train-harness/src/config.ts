/** Architecture configuration shared with the inference engine. */

export interface DemucsConfig {
  channels: number;
  layers: number;
  hidden: number;
  kernel: number;
  stride: number;
  lstm_layers: number;
  sample_rate: number;
  normalize_input: boolean;
}

export function makeConfig(partial: Partial<DemucsConfig> & { channels: number }): DemucsConfig {
  const cfg: DemucsConfig = {
    layers: 5,
    hidden: 64,
    kernel: 8,
    stride: 4,
    lstm_layers: 2,
    sample_rate: 48000,
    normalize_input: true,
    ...partial,
  };
  if (cfg.channels < 1) throw new Error('channels must be >= 1');
  if (cfg.layers < 1) throw new Error('layers must be >= 1');
  if (!(cfg.kernel > cfg.stride && cfg.stride >= 1)) {
    throw new Error(`require kernel > stride >= 1, got K=${cfg.kernel} S=${cfg.stride}`);
  }
  return cfg;
}

export function widths(cfg: DemucsConfig): number[] {
  return Array.from({ length: cfg.layers }, (_, i) => cfg.hidden * 2 ** i);
}

export function lstmWidth(cfg: DemucsConfig): number {
  return widths(cfg)[cfg.layers - 1];
}

export function strideTotal(cfg: DemucsConfig): number {
  return cfg.stride ** cfg.layers;
}

export interface TensorSpec {
  name: string;
  shape: number[];
}

/** Canonical tensor table (serialization order), matching the engine. */
export function expectedTensors(cfg: DemucsConfig): TensorSpec[] {
  const ws = widths(cfg);
  const w = lstmWidth(cfg);
  const k = cfg.kernel;
  const out: TensorSpec[] = [];
  for (let i = 0; i < cfg.layers; i++) {
    const cin = i === 0 ? cfg.channels : ws[i - 1];
    const cout = ws[i];
    out.push({ name: `encoder.${i}.conv.weight`, shape: [cout, cin, k] });
    out.push({ name: `encoder.${i}.conv.bias`, shape: [cout] });
    out.push({ name: `encoder.${i}.expand.weight`, shape: [2 * cout, cout, 1] });
    out.push({ name: `encoder.${i}.expand.bias`, shape: [2 * cout] });
  }
  for (let j = 0; j < cfg.lstm_layers; j++) {
    out.push({ name: `lstm.${j}.weight_ih`, shape: [4 * w, w] });
    out.push({ name: `lstm.${j}.weight_hh`, shape: [4 * w, w] });
    out.push({ name: `lstm.${j}.bias_ih`, shape: [4 * w] });
    out.push({ name: `lstm.${j}.bias_hh`, shape: [4 * w] });
  }
  for (let i = cfg.layers - 1; i >= 0; i--) {
    const cw = ws[i];
    const cout = i === 0 ? cfg.channels : ws[i - 1];
    out.push({ name: `decoder.${i}.expand.weight`, shape: [2 * cw, cw, 1] });
    out.push({ name: `decoder.${i}.expand.bias`, shape: [2 * cw] });
    out.push({ name: `decoder.${i}.convt.weight`, shape: [cw, cout, k] });
    out.push({ name: `decoder.${i}.convt.bias`, shape: [cout] });
  }
  return out;
}
