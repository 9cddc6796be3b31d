"""Seeded synthetic corpora.

Desk-scale stand-ins for real capture runs: knowable and unknowable
queries whose traces separate in mean entropy by a configurable gap
(and, more weakly, in response length), with ground-truth verdicts known
by construction. Used by the test suite and handy for demo runs; every
draw flows from one seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .trace_model import (
    Category,
    GenerationTrace,
    QueryRecord,
    Tier,
    TruthStatus,
    Verdict,
    VerdictLabel,
    write_queries,
    write_traces,
)

VOCAB_SIZE_BOUND = 50000

REFUSAL_TEXT = "I cannot know that."


@dataclass(frozen=True)
class SynthConfig:
    n_knowable: int = 100
    n_unknowable: int = 100
    model_ids: tuple[str, ...] = ("synth-model",)
    mean_entropy_knowable: float = 1.5
    entropy_gap: float = 0.494          # knowable vs unknowable trace-mean separation
    entropy_sd: float = 0.5
    token_entropy_sd: float = 0.3
    length_mean: float = 60.0
    length_gap: float = 3.55
    length_sd: float = 20.0
    p_correct_knowable: float = 0.85
    p_refusal_unknowable: float = 0.30
    topk: int | None = None


@dataclass
class SynthCorpus:
    queries: list[QueryRecord]
    traces: list[GenerationTrace]
    verdicts: dict[tuple[str, str], Verdict]
    truth: dict[str, TruthStatus]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """Emit queries.csv, traces.jsonl, and a replay transcript covering
        every response a classifier could be asked about."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "queries": out / "queries.csv",
            "traces": out / "traces.jsonl",
            "transcript": out / "transcript.json",
        }
        write_queries(self.queries, paths["queries"])
        write_traces(self.traces, paths["traces"], vocab_size_bound=VOCAB_SIZE_BOUND)
        entries = []
        for trace in self.traces:
            verdict = self.verdicts[(trace.query_id, trace.model_id)]
            qtype = "knowable" if self.truth[trace.query_id] is TruthStatus.DETERMINED else "unknowable"
            entries.append(
                {
                    "query_type": qtype,
                    "response_text": trace.text,
                    "reply": verdict.label.value.upper(),
                }
            )
        paths["transcript"].write_text(json.dumps(entries, indent=1), encoding="utf-8")
        return paths


def _trace_tokens(rng: random.Random, trace_mean: float, length: int, sd: float) -> list[float]:
    cap = math.log(VOCAB_SIZE_BOUND) - 0.1
    return [min(cap, max(0.0, rng.gauss(trace_mean, sd))) for _ in range(length)]


def generate_corpus(seed: int, config: SynthConfig = SynthConfig()) -> SynthCorpus:
    rng = random.Random(seed)
    queries: list[QueryRecord] = []
    traces: list[GenerationTrace] = []
    verdicts: dict[tuple[str, str], Verdict] = {}
    truth: dict[str, TruthStatus] = {}

    knowable_cats = [Category.CONTROL, Category.WOMBAT]
    unknowable_cats = [Category.GLAVINSKY, Category.WESTPHALIA, Category.PRIVATE_FUTURE]

    specs = []
    for i in range(config.n_knowable):
        specs.append((f"k{i:04d}", True, knowable_cats[i % len(knowable_cats)]))
    for i in range(config.n_unknowable):
        specs.append((f"u{i:04d}", False, unknowable_cats[i % len(unknowable_cats)]))

    for query_id, knowable, category in specs:
        if knowable:
            answer = f"fact-{query_id}"
            queries.append(
                QueryRecord(query_id, f"What is the value of {query_id}?", category, TruthStatus.DETERMINED, (answer,))
            )
            truth[query_id] = TruthStatus.DETERMINED
        else:
            queries.append(
                QueryRecord(query_id, f"What did {query_id} conclude?", category, TruthStatus.UNDERDETERMINED)
            )
            truth[query_id] = TruthStatus.UNDERDETERMINED

    for model_id in config.model_ids:
        for query_id, knowable, _ in specs:
            if knowable:
                trace_mean = rng.gauss(config.mean_entropy_knowable, config.entropy_sd)
                length = max(5, round(rng.gauss(config.length_mean, config.length_sd)))
                correct = rng.random() < config.p_correct_knowable
                text = (
                    f"The value of {query_id} is fact-{query_id}."
                    if correct
                    else f"The value of {query_id} is clearly something-else-{query_id}."
                )
                label = VerdictLabel.CORRECT if correct else VerdictLabel.INCORRECT
            else:
                trace_mean = rng.gauss(
                    config.mean_entropy_knowable + config.entropy_gap, config.entropy_sd
                )
                length = max(5, round(rng.gauss(config.length_mean + config.length_gap, config.length_sd)))
                refused = rng.random() < config.p_refusal_unknowable
                text = REFUSAL_TEXT if refused else f"It was definitely invented-detail-{query_id}."
                label = VerdictLabel.REFUSAL if refused else VerdictLabel.INCORRECT
            trace_mean = max(0.05, trace_mean)
            entropies = _trace_tokens(rng, trace_mean, length, config.token_entropy_sd)
            traces.append(
                GenerationTrace(
                    query_id=query_id,
                    model_id=model_id,
                    text=text,
                    tokens=tuple(f"t{t}" for t in range(length)),
                    token_entropies=tuple(entropies),
                    is_abstention=label is VerdictLabel.REFUSAL,
                )
            )
            verdicts[(query_id, model_id)] = Verdict(query_id, model_id, label, Tier.PROGRAMMATIC, "synthetic")

    return SynthCorpus(queries, traces, verdicts, truth)
