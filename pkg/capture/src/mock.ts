/** Deterministic mock model backend.
 *
 * Stands in for an open-weight model on machines without GPUs: produces a
 * full next-token distribution at every step from a seeded hash of
 * (model, query, position, previous token), so greedy decoding is
 * byte-reproducible across runs and machines. Queries whose text smells
 * unanswerable get flatter (higher-entropy) distributions, mirroring the
 * telemetry the engine consumes.
 */

import type { DecodingParams, GenerationResult, ModelBackend, QueryRow, TokenStep } from "./types.js";

const WORDS = [
  "the", "a", "of", "in", "is", "was", "study", "capital", "city", "year",
  "answer", "value", "result", "fact", "known", "reported", "measured", "first",
  "treaty", "syndrome", "paper", "journal", "record", "data", "source", "model",
  "entropy", "signal", "claim", "detail", "figure", "estimate", "roughly", "exactly",
  "paris", "berlin", "kyoto", "1947", "1973", "2021", "seven", "twelve", "cube",
  "doubles", "halves", "unknown", "uncertain", "disputed", "archived", "cited",
  "evidence", "finding", "conclusion", "method", "sample", "survey", "census",
  "orbit", "enzyme", "isotope", "glacier", "dialect", "manuscript",
];
const EOS = "<eos>";
export const MOCK_VOCAB: readonly string[] = [...WORDS, EOS];

const REFUSAL_TEXT = "I cannot know that.";

/** 32-bit string hash (xmur3 finalizer). */
function hash32(s: string): number {
  let h = 1779033703 ^ s.length;
  for (let i = 0; i < s.length; i++) {
    h = Math.imul(h ^ s.charCodeAt(i), 3432918353);
    h = (h << 13) | (h >>> 19);
  }
  h = Math.imul(h ^ (h >>> 16), 2246822507);
  h = Math.imul(h ^ (h >>> 13), 3266489909);
  return (h ^= h >>> 16) >>> 0;
}

/** mulberry32 PRNG over a 32-bit state. */
function prng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function softmax(logits: number[]): Float64Array {
  let peak = -Infinity;
  for (const l of logits) if (l > peak) peak = l;
  const exps = logits.map((l) => Math.exp(l - peak));
  let total = 0;
  for (const e of exps) total += e;
  return Float64Array.from(exps, (e) => e / total);
}

const UNANSWERABLE_HINTS = ["will", "next", "conclude", "concluded", "private", "future", "cite", "citation"];

export class MockBackend implements ModelBackend {
  readonly modelId: string;
  readonly vocabSizeBound = MOCK_VOCAB.length;
  private readonly variant: string;

  constructor(variant: string) {
    this.variant = variant;
    this.modelId = `mock:${variant}`;
  }

  private distribution(query: QueryRow, step: number, prev: string): Float64Array {
    const key = `${this.variant}|${query.queryId}|${query.text}|${step}|${prev}`;
    const next = prng(hash32(key));
    const lowered = query.text.toLowerCase();
    const flat = UNANSWERABLE_HINTS.some((h) => lowered.includes(h)) || query.truthStatus === "Underdetermined";
    // sharper logits for grounded retrieval, flatter for fabrication-prone queries
    const scale = flat ? 1.6 : 5.0;
    const logits = MOCK_VOCAB.map(() => (next() - 0.5) * 2 * scale);
    return softmax(logits);
  }

  async generate(query: QueryRow, params: DecodingParams, attentionLastN: number): Promise<GenerationResult> {
    const gate = prng(hash32(`${this.variant}|abstain|${query.queryId}`));
    if (query.truthStatus === "Underdetermined" && gate() < 0.25) {
      return this.refusal(query, attentionLastN);
    }

    const sampleDraw = params.sample ? prng(hash32(`sample|${params.seed}|${query.queryId}`)) : null;
    const steps: TokenStep[] = [];
    const emitted: string[] = [];
    let prev = "<bos>";
    for (let t = 0; t < params.maxNewTokens; t++) {
      const probs = this.distribution(query, t, prev);
      let chosen = 0;
      if (sampleDraw) {
        const u = sampleDraw();
        let acc = 0;
        for (let i = 0; i < probs.length; i++) {
          acc += probs[i];
          if (u <= acc) {
            chosen = i;
            break;
          }
        }
      } else {
        for (let i = 1; i < probs.length; i++) if (probs[i] > probs[chosen]) chosen = i;
      }
      const token = MOCK_VOCAB[chosen];
      steps.push({ token, probs, vocab: MOCK_VOCAB });
      if (token === EOS) break;
      emitted.push(token);
      prev = token;
    }
    return {
      text: emitted.join(" "),
      steps,
      isAbstention: false,
      attentionRows: attentionLastN > 0 ? this.attention(query, steps.length, attentionLastN) : undefined,
    };
  }

  private refusal(query: QueryRow, attentionLastN: number): GenerationResult {
    // refusals are short and confident: near-one-hot per-token distributions
    const tokens = ["unknown", "uncertain", EOS];
    const steps: TokenStep[] = tokens.map((token, t) => {
      const idx = MOCK_VOCAB.indexOf(token);
      const probs = new Float64Array(MOCK_VOCAB.length).fill(0.001 / (MOCK_VOCAB.length - 1));
      probs[idx] = 0.999;
      let total = 0;
      for (const p of probs) total += p;
      for (let i = 0; i < probs.length; i++) probs[i] /= total;
      return { token, probs, vocab: MOCK_VOCAB };
    });
    return {
      text: REFUSAL_TEXT,
      steps,
      isAbstention: true,
      attentionRows: attentionLastN > 0 ? this.attention(query, steps.length, attentionLastN) : undefined,
    };
  }

  /** Per-head summary vectors for the final N layers (4 heads, dim 16). */
  private attention(query: QueryRow, length: number, lastN: number): number[][] {
    const heads = 4;
    const dim = 16;
    const rows: number[][] = [];
    for (let layer = 0; layer < lastN; layer++) {
      for (let head = 0; head < heads; head++) {
        const next = prng(hash32(`${this.variant}|attn|${query.queryId}|${layer}|${head}|${length}`));
        rows.push(Array.from({ length: dim }, () => Math.round(next() * 1e6) / 1e6));
      }
    }
    return rows;
  }
}

export class FailingBackend implements ModelBackend {
  readonly modelId = "mock:failing";
  readonly vocabSizeBound = MOCK_VOCAB.length;
  async generate(query: QueryRow): Promise<GenerationResult> {
    throw new Error(`synthetic out-of-memory on ${query.queryId}`);
  }
}
