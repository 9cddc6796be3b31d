/** The capture loop: run every query through the backend, record per-token
 * entropy from the pre-sampling distribution plus the top-k pairs, and
 * write the trace JSONL. Per-query backend failures are reported and
 * skipped; the run continues.
 */

import { writeFileSync } from "node:fs";
import { loadQueries } from "./csv.js";
import { fullEntropy, pooledTailEntropy, topkLogprobs } from "./entropy.js";
import { headerLine, traceLine, type TraceLine } from "./jsonl.js";
import type { CaptureJob, ModelBackend, TokenStep } from "./types.js";

const FULL_MASS_TOL = 1e-6;

/** Entropy of a step's exported distribution. A full distribution is used
 * as-is; a top-k-only distribution (mass < 1) gets its tail pooled, the
 * tightest entropy the exported interface supports. */
export function stepEntropy(step: TokenStep): number {
  let mass = 0;
  for (let i = 0; i < step.probs.length; i++) mass += step.probs[i];
  if (mass >= 1 - FULL_MASS_TOL) return fullEntropy(step.probs);
  const pairs: [string, number][] = [];
  for (let i = 0; i < step.probs.length; i++) {
    if (step.probs[i] > 0) pairs.push([step.vocab[i], Math.log(step.probs[i])]);
  }
  pairs.sort((a, b) => b[1] - a[1]);
  return pooledTailEntropy(pairs);
}

export interface CaptureOutcome {
  written: number;
  failures: { queryId: string; error: string }[];
}

export async function capture(job: CaptureJob, backend: ModelBackend): Promise<CaptureOutcome> {
  if (job.topk < 1) throw new Error(`topk must be >= 1, got ${job.topk}`);
  const queries = loadQueries(job.queriesPath);
  const lines: string[] = [headerLine(backend.vocabSizeBound)];
  const debugLines: string[] = [];
  const failures: { queryId: string; error: string }[] = [];

  for (const query of queries) {
    try {
      const result = await backend.generate(query, job.decoding, job.attentionLastN);
      const tokens = result.steps.map((s) => s.token);
      const entropies = result.steps.map(stepEntropy);
      const topk = result.steps.map((s) => topkLogprobs(s.probs, s.vocab, job.topk));
      const trace: TraceLine = {
        query_id: query.queryId,
        model_id: backend.modelId,
        text: result.text,
        tokens,
        token_entropies: entropies,
        topk_logprobs: topk,
        is_abstention: result.isAbstention,
      };
      if (result.attentionRows && result.attentionRows.length > 0) {
        const dim = result.attentionRows[0].length;
        trace.attention_summary = {
          shape: [result.attentionRows.length, dim],
          data: result.attentionRows.flat(),
        };
      }
      lines.push(traceLine(trace));
      if (job.debugDistributionsPath) {
        result.steps.forEach((step, t) => {
          debugLines.push(
            JSON.stringify({ query_id: query.queryId, step: t, probs: Array.from(step.probs) })
          );
        });
      }
    } catch (err) {
      const error = err instanceof Error ? err.message : String(err);
      failures.push({ queryId: query.queryId, error });
      process.stderr.write(`capture: ${query.queryId}: ${error}; continuing\n`);
    }
  }

  writeFileSync(job.outPath, lines.join("\n") + "\n", "utf-8");
  if (job.debugDistributionsPath) {
    writeFileSync(job.debugDistributionsPath, debugLines.join("\n") + "\n", "utf-8");
  }
  return { written: lines.length - 1, failures };
}
