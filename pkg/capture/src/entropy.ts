/** Entropy arithmetic, in nats, matching the engine's conventions. */

/** Shannon entropy of a full distribution; 0 ln 0 := 0. */
export function fullEntropy(probs: ArrayLike<number>): number {
  let h = 0;
  for (let i = 0; i < probs.length; i++) {
    const p = probs[i];
    if (p < 0) throw new Error(`negative probability ${p}`);
    if (p > 0) h -= p * Math.log(p);
  }
  return h < 0 ? 0 : h;
}

/** Top-k (token, logprob) pairs, sorted by probability descending. */
export function topkLogprobs(probs: ArrayLike<number>, vocab: readonly string[], k: number): [string, number][] {
  const indexed: [number, number][] = [];
  for (let i = 0; i < probs.length; i++) indexed.push([probs[i], i]);
  indexed.sort((a, b) => b[0] - a[0] || a[1] - b[1]);
  const out: [string, number][] = [];
  for (const [p, i] of indexed.slice(0, k)) {
    if (p <= 0) break; // zero-probability tokens carry no information
    out.push([vocab[i], Math.log(p)]);
  }
  if (out.length === 0) throw new Error("distribution has no positive mass");
  return out;
}

/** Entropy of the top-k with all tail mass pooled into one atom: a lower
 * bound on the full-vocabulary entropy by the pooling inequality. */
export function pooledTailEntropy(topk: readonly (readonly [string, number])[]): number {
  const probs = topk.map(([, lp]) => Math.exp(lp));
  let mass = 0;
  for (const p of probs) mass += p;
  if (mass > 1 + 1e-6) throw new Error(`top-k mass ${mass} exceeds 1`);
  const tail = 1 - mass;
  if (tail > 1e-9) probs.push(tail);
  let h = 0;
  for (const p of probs) if (p > 0) h -= p * Math.log(p);
  return h < 0 ? 0 : h;
}
