"""Verification cost-surface engine for language-model outputs."""

from .trace_model import (
    Category,
    GenerationTrace,
    QueryRecord,
    Tier,
    TruthStatus,
    Verdict,
    VerdictLabel,
    load_queries,
    load_traces,
)
from .signals import CorpusStats, SignalVector, aggregate_signals, entropy_lower_bound_topk, token_entropy
from .metrics import CostSurface, auc, budget_curve, spearman

__version__ = "0.1.0"

__all__ = [
    "Category",
    "CorpusStats",
    "CostSurface",
    "GenerationTrace",
    "QueryRecord",
    "SignalVector",
    "Tier",
    "TruthStatus",
    "Verdict",
    "VerdictLabel",
    "aggregate_signals",
    "auc",
    "budget_curve",
    "entropy_lower_bound_topk",
    "load_queries",
    "load_traces",
    "spearman",
    "token_entropy",
]
