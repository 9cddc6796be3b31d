/** Trace JSONL writer.
 *
 * Key order is fixed (query_id, model_id, text, tokens, token_entropies,
 * topk_logprobs?, attention_summary?, is_abstention) and numbers go
 * through JSON.stringify's shortest round-trip form, so a given capture
 * is byte-stable across reruns.
 */

export interface TraceLine {
  query_id: string;
  model_id: string;
  text: string;
  tokens: string[];
  token_entropies: number[];
  topk_logprobs?: [string, number][][];
  attention_summary?: { shape: [number, number]; data: number[] };
  is_abstention: boolean;
}

export function headerLine(vocabSizeBound: number): string {
  return JSON.stringify({ schema: "trace/1", vocab_size_bound: vocabSizeBound });
}

export function traceLine(trace: TraceLine): string {
  const ordered: Record<string, unknown> = {
    query_id: trace.query_id,
    model_id: trace.model_id,
    text: trace.text,
    tokens: trace.tokens,
    token_entropies: trace.token_entropies,
  };
  if (trace.topk_logprobs !== undefined) ordered.topk_logprobs = trace.topk_logprobs;
  if (trace.attention_summary !== undefined) ordered.attention_summary = trace.attention_summary;
  ordered.is_abstention = trace.is_abstention;
  return JSON.stringify(ordered);
}
