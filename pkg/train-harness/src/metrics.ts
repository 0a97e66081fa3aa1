/** Scale-invariant SDR on the first channel, matching the evaluator. */

export function siSdr(estimate: Float32Array, reference: Float32Array,
                      capDb = 100): number {
  if (estimate.length !== reference.length) {
    throw new Error(`length mismatch: ${estimate.length} vs ${reference.length}`);
  }
  const n = estimate.length;
  let meanE = 0;
  let meanR = 0;
  for (let i = 0; i < n; i++) {
    meanE += estimate[i];
    meanR += reference[i];
  }
  meanE /= n;
  meanR /= n;
  let dot = 0;
  let rr = 0;
  for (let i = 0; i < n; i++) {
    const e = estimate[i] - meanE;
    const r = reference[i] - meanR;
    dot += e * r;
    rr += r * r;
  }
  if (rr <= 0) throw new Error('reference has no energy');
  const alpha = dot / rr;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    const e = estimate[i] - meanE;
    const r = reference[i] - meanR;
    const t = alpha * r;
    num += t * t;
    den += (t - e) * (t - e);
  }
  const ratio = num / (den + 1e-12);
  const db = ratio > 0 ? 10 * Math.log10(ratio) : -Infinity;
  return Math.max(-capDb, Math.min(capDb, db));
}

export function siSdrImprovement(mixture: Float32Array, estimate: Float32Array,
                                 reference: Float32Array): number {
  return siSdr(estimate, reference) - siSdr(mixture, reference);
}
