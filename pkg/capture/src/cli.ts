#!/usr/bin/env node
/** et-capture: capture per-token telemetry into trace JSONL.
 *
 *   et-capture capture --model mock:demo --queries queries.csv --out traces.jsonl \
 *       [--topk 5] [--attention off|lastN] [--max-new-tokens 200] \
 *       [--sample --seed 7] [--debug-distributions dump.jsonl]
 */

import { resolveBackend } from "./backend.js";
import { capture } from "./capture.js";
import type { CaptureJob } from "./types.js";

function parseArgs(argv: string[]): CaptureJob {
  if (argv[0] !== "capture") {
    throw new Error(`unknown command ${argv[0] ?? "(none)"}; expected "capture"`);
  }
  const flags = new Map<string, string>();
  const bare = new Set<string>();
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const name = arg.slice(2);
    if (name === "sample") {
      bare.add(name);
      continue;
    }
    const value = argv[++i];
    if (value === undefined) throw new Error(`missing value for --${name}`);
    flags.set(name, value);
  }
  for (const required of ["model", "queries", "out"]) {
    if (!flags.has(required)) throw new Error(`missing --${required}`);
  }
  let attentionLastN = 0;
  const attention = flags.get("attention") ?? "off";
  if (attention !== "off") {
    const match = /^last(\d+)$/.exec(attention);
    if (!match) throw new Error(`--attention must be off or last<N>, got ${attention}`);
    attentionLastN = parseInt(match[1], 10);
  }
  return {
    model: flags.get("model")!,
    queriesPath: flags.get("queries")!,
    outPath: flags.get("out")!,
    topk: parseInt(flags.get("topk") ?? "5", 10),
    attentionLastN,
    decoding: {
      sample: bare.has("sample"),
      seed: parseInt(flags.get("seed") ?? "0", 10),
      maxNewTokens: parseInt(flags.get("max-new-tokens") ?? "200", 10),
    },
    debugDistributionsPath: flags.get("debug-distributions"),
  };
}

export async function main(argv: string[]): Promise<number> {
  let job: CaptureJob;
  try {
    job = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`${err instanceof Error ? err.message : err}\n`);
    return 2;
  }
  try {
    const backend = resolveBackend(job.model, job.topk);
    const outcome = await capture(job, backend);
    process.stderr.write(
      `captured ${outcome.written} traces to ${job.outPath}` +
        (outcome.failures.length ? ` (${outcome.failures.length} failed queries)` : "") +
        "\n"
    );
    return 0;
  } catch (err) {
    process.stderr.write(`${err instanceof Error ? err.message : err}\n`);
    return 1;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js") || process.argv[1]?.endsWith("et-capture");
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
