from __future__ import annotations

import pytest

from entropy_triage.trace_model import (
    Category,
    GenerationTrace,
    QueryRecord,
    TruthStatus,
)


@pytest.fixture
def paris_query() -> QueryRecord:
    return QueryRecord("q001", "What is the capital of France?", Category.CONTROL, TruthStatus.DETERMINED, ("Paris",))


@pytest.fixture
def unknowable_query() -> QueryRecord:
    return QueryRecord("q101", "What did the 2021 decay study conclude?", Category.GLAVINSKY, TruthStatus.UNDERDETERMINED)


def make_trace(
    query_id: str = "q001",
    model_id: str = "model-a",
    text: str = "The capital of France is Paris.",
    entropies: tuple[float, ...] = (0.2, 0.1, 0.4),
    **kwargs,
) -> GenerationTrace:
    tokens = tuple(f"t{i}" for i in range(len(entropies)))
    return GenerationTrace(
        query_id=query_id,
        model_id=model_id,
        text=text,
        tokens=tokens,
        token_entropies=entropies,
        **kwargs,
    )


@pytest.fixture
def trace_factory():
    return make_trace
