/** Shared types for the capture harness. */

export interface QueryRow {
  queryId: string;
  text: string;
  category: string;
  truthStatus: string;
  expectedAnswers: string[];
}

/** One decoding step: the pre-sampling distribution and the pick. */
export interface TokenStep {
  token: string;
  /** Full probability distribution over the backend's vocabulary, aligned with `vocab`. */
  probs: Float64Array;
  vocab: readonly string[];
}

export interface GenerationResult {
  text: string;
  steps: TokenStep[];
  isAbstention: boolean;
  /** Per-head flattened attention rows, present when the job asked for them. */
  attentionRows?: number[][];
}

export interface DecodingParams {
  /** Greedy unless sampling is explicitly enabled; greedy keeps reruns byte-identical. */
  sample: boolean;
  seed: number;
  maxNewTokens: number;
}

export interface CaptureJob {
  model: string;
  queriesPath: string;
  outPath: string;
  topk: number;
  /** 0 = off; otherwise dump the final N layers' head summaries. */
  attentionLastN: number;
  decoding: DecodingParams;
  /** Optional JSONL dump of every full distribution, for entropy recomputation. */
  debugDistributionsPath?: string;
}

export interface ModelBackend {
  readonly modelId: string;
  readonly vocabSizeBound: number;
  generate(query: QueryRow, params: DecodingParams, attentionLastN: number): Promise<GenerationResult>;
}
