/** HTTP backend for servers that expose per-token top-k log-probabilities
 * (an ollama-style chat endpoint). Over the wire only the top-k is
 * available, so the recorded entropy is the pooled-tail entropy of that
 * top-k: the tightest value the exported interface supports.
 */

import type { DecodingParams, GenerationResult, ModelBackend, QueryRow, TokenStep } from "./types.js";

interface WireLogprobEntry {
  token: string;
  logprob: number;
  top_logprobs?: { token: string; logprob: number }[];
}

interface WireResponse {
  message?: { content?: string };
  logprobs?: WireLogprobEntry[];
}

export class HttpBackend implements ModelBackend {
  readonly modelId: string;
  readonly vocabSizeBound: number;
  private readonly url: string;
  private readonly topk: number;

  constructor(url: string, model: string, topk: number, vocabSizeBound = 1 << 20) {
    this.url = url;
    this.modelId = model;
    this.topk = topk;
    this.vocabSizeBound = vocabSizeBound;
  }

  async generate(query: QueryRow, params: DecodingParams): Promise<GenerationResult> {
    const body = {
      model: this.modelId,
      messages: [{ role: "user", content: query.text }],
      stream: false,
      logprobs: true,
      top_logprobs: this.topk,
      options: {
        temperature: params.sample ? 1.0 : 0.0,
        seed: params.seed,
        num_predict: params.maxNewTokens,
      },
    };
    const resp = await fetch(this.url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new Error(`backend ${this.url}: HTTP ${resp.status}`);
    const parsed = (await resp.json()) as WireResponse;
    const entries = parsed.logprobs ?? [];
    const steps: TokenStep[] = entries.map((entry) => {
      const alts = entry.top_logprobs?.length
        ? entry.top_logprobs
        : [{ token: entry.token, logprob: entry.logprob }];
      const sorted = [...alts].sort((a, b) => b.logprob - a.logprob);
      const probs = Float64Array.from(sorted, (a) => Math.exp(a.logprob));
      return { token: entry.token, probs, vocab: sorted.map((a) => a.token) };
    });
    return {
      text: parsed.message?.content ?? steps.map((s) => s.token).join(""),
      steps,
      isAbstention: false,
    };
  }
}
