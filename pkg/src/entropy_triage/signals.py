"""Tensor- and text-channel features extracted from a trace.

Everything here is a pure function of the trace plus run-level corpus
statistics; judges consume the resulting SignalVector and nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MassExceedsOne, NegativeProbability, NotNormalized, Unsorted
from .trace_model import GenerationTrace

SPIKE_SIGMA_FACTOR = 1.5

_NORMALIZATION_TOL = 1e-9
_MASS_TOL = 1e-6


def token_entropy(distribution: Sequence[float]) -> float:
    """Shannon entropy -sum(p ln p) in nats, with 0 ln 0 := 0.

    The distribution must be non-negative and sum to 1 within 1e-9.
    """
    total = math.fsum(distribution)
    if not (1.0 - _NORMALIZATION_TOL <= total <= 1.0 + _NORMALIZATION_TOL):
        raise NotNormalized(f"probabilities sum to {total!r}")
    terms = []
    for p in distribution:
        if p < 0.0:
            raise NegativeProbability(f"probability {p!r}")
        if p > 0.0:
            terms.append(p * math.log(p))
    return max(0.0, -math.fsum(terms))


def entropy_lower_bound_topk(topk: Sequence[tuple[str, float]]) -> float:
    """Entropy of the top-k distribution with the tail pooled as one atom.

    Pooling the unobserved tail into a single outcome can only merge
    probability mass, so the result never exceeds the entropy of any
    refinement of that tail -- in particular the full-vocabulary entropy.
    """
    logprobs = [lp for _, lp in topk]
    if any(a < b for a, b in zip(logprobs, logprobs[1:])):
        raise Unsorted("topk logprobs must be sorted descending")
    probs = [math.exp(lp) for lp in logprobs]
    mass = math.fsum(probs)
    if mass > 1.0 + _MASS_TOL:
        raise MassExceedsOne(f"topk mass {mass!r}")
    tail = 1.0 - mass
    if tail > _NORMALIZATION_TOL:
        probs.append(tail)
    return max(0.0, -math.fsum(p * math.log(p) for p in probs if p > 0.0))


@dataclass(frozen=True)
class CorpusStats:
    """Run-level pooled statistics over every token entropy in the corpus."""

    median: float
    sigma: float

    @classmethod
    def from_traces(cls, traces: Iterable[GenerationTrace]) -> "CorpusStats":
        pooled: list[float] = []
        for t in traces:
            pooled.extend(t.token_entropies)
        if not pooled:
            return cls(0.0, 0.0)
        pooled.sort()
        n = len(pooled)
        mid = n // 2
        median = pooled[mid] if n % 2 else 0.5 * (pooled[mid - 1] + pooled[mid])
        mean = math.fsum(pooled) / n
        var = math.fsum((h - mean) ** 2 for h in pooled) / n
        return cls(median, math.sqrt(var))

    @property
    def spike_threshold(self) -> float:
        return self.median + SPIKE_SIGMA_FACTOR * self.sigma


@dataclass(frozen=True)
class SignalVector:
    mean_entropy: float
    max_entropy: float
    entropy_std: float
    spike_count: int
    response_length: int
    hedge_flag: bool
    refusal_flag: bool
    topk_entropy_lb_mean: float | None = None
    degenerate: bool = False


class PatternList:
    """Case-insensitive substring patterns from a versioned text file.

    One pattern per line; `#` starts a comment; blank lines ignored.
    """

    def __init__(self, patterns: Iterable[str]):
        self.patterns = tuple(p.lower() for p in patterns if p)

    @classmethod
    def from_file(cls, path: str | Path) -> "PatternList":
        patterns = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                patterns.append(line)
        return cls(patterns)

    @classmethod
    def builtin(cls, name: str) -> "PatternList":
        text = resources.files("entropy_triage.data").joinpath(name).read_text(encoding="utf-8")
        patterns = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                patterns.append(line)
        return cls(patterns)

    def matches(self, text: str) -> bool:
        lowered = text.lower()
        return any(p in lowered for p in self.patterns)


def default_hedge_patterns() -> PatternList:
    return PatternList.builtin("hedge_patterns.txt")


def default_refusal_patterns() -> PatternList:
    return PatternList.builtin("refusal_patterns.txt")


def _one_pass_mean_std(values: Sequence[float]) -> tuple[float, float]:
    # Welford; population variance to match the sigma_H definition.
    mean = 0.0
    m2 = 0.0
    for i, x in enumerate(values, start=1):
        delta = x - mean
        mean += delta / i
        m2 += delta * (x - mean)
    return mean, math.sqrt(m2 / len(values))


def aggregate_signals(
    trace: GenerationTrace,
    corpus_stats: CorpusStats,
    *,
    hedge_patterns: PatternList | None = None,
    refusal_patterns: PatternList | None = None,
) -> SignalVector:
    """Aggregate per-token entropies and text flags into one SignalVector.

    Spikes are counted against the pooled corpus threshold
    median + 1.5 * sigma. An empty token list yields the degenerate
    vector (all numeric fields zero).
    """
    hedge = hedge_patterns if hedge_patterns is not None else default_hedge_patterns()
    refusal = refusal_patterns if refusal_patterns is not None else default_refusal_patterns()
    hedge_flag = hedge.matches(trace.text)
    refusal_flag = trace.is_abstention or refusal.matches(trace.text)

    entropies = trace.token_entropies
    if not entropies:
        return SignalVector(0.0, 0.0, 0.0, 0, 0, hedge_flag, refusal_flag, None, degenerate=True)

    mean, std = _one_pass_mean_std(entropies)
    threshold = corpus_stats.spike_threshold
    spikes = sum(1 for h in entropies if h > threshold)

    topk_mean = None
    if trace.topk_logprobs is not None and len(trace.topk_logprobs) > 0:
        lbs = [entropy_lower_bound_topk(per_token) for per_token in trace.topk_logprobs]
        topk_mean = math.fsum(lbs) / len(lbs)

    return SignalVector(
        mean_entropy=mean,
        max_entropy=max(entropies),
        entropy_std=std,
        spike_count=spikes,
        response_length=len(trace.tokens),
        hedge_flag=hedge_flag,
        refusal_flag=refusal_flag,
        topk_entropy_lb_mean=topk_mean,
    )
