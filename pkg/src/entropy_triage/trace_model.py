"""Canonical data model: queries, generation traces, verdicts.

Loaders validate on ingest and reject bad rows outright; there is no
repair mode. Writers emit a canonical byte layout (fixed field order,
floats at 17 significant digits) so that write(load(x)) == x for
canonical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import (
    DanglingTrace,
    DuplicateId,
    EntropyOutOfRange,
    InvariantViolation,
    LengthMismatch,
    ParseError,
    SchemaVersionUnsupported,
)

TRACE_SCHEMA = "trace/1"

QUERY_CSV_HEADER = "query_id,text,category,truth_status,expected_answers"


class Category(Enum):
    CONTROL = "Control"
    WOMBAT = "Wombat"
    GLAVINSKY = "Glavinsky"
    WESTPHALIA = "Westphalia"
    PRIVATE_FUTURE = "PrivateFuture"
    CITATION = "Citation"


class TruthStatus(Enum):
    DETERMINED = "Determined"
    UNDERDETERMINED = "Underdetermined"


# Categories whose truth status is forced by construction.
_FORCED_UNDERDETERMINED = {Category.GLAVINSKY, Category.WESTPHALIA, Category.PRIVATE_FUTURE}
_FORCED_DETERMINED = {Category.CONTROL, Category.WOMBAT}


class VerdictLabel(Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    REFUSAL = "Refusal"


class Tier(Enum):
    PROGRAMMATIC = "Programmatic"
    CLASSIFIER = "Classifier"
    HUMAN = "Human"


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    text: str
    category: Category
    truth_status: TruthStatus
    expected_answers: tuple[str, ...] = ()

    def __post_init__(self):
        if self.category in _FORCED_UNDERDETERMINED and self.truth_status is not TruthStatus.UNDERDETERMINED:
            raise InvariantViolation(
                f"query {self.query_id!r}: category {self.category.value} must be Underdetermined"
            )
        if self.category in _FORCED_DETERMINED and self.truth_status is not TruthStatus.DETERMINED:
            raise InvariantViolation(
                f"query {self.query_id!r}: category {self.category.value} must be Determined"
            )
        if self.truth_status is TruthStatus.DETERMINED and not self.expected_answers:
            raise InvariantViolation(
                f"query {self.query_id!r}: Determined queries need expected answers"
            )
        if self.truth_status is TruthStatus.UNDERDETERMINED and self.expected_answers:
            raise InvariantViolation(
                f"query {self.query_id!r}: Underdetermined queries must not list expected answers"
            )


@dataclass(frozen=True)
class GenerationTrace:
    query_id: str
    model_id: str
    text: str
    tokens: tuple[str, ...]
    token_entropies: tuple[float, ...]
    topk_logprobs: tuple[tuple[tuple[str, float], ...], ...] | None = None
    attention_summary: "AttentionBlock | None" = None
    is_abstention: bool = False

    def __post_init__(self):
        if len(self.tokens) != len(self.token_entropies):
            raise LengthMismatch.for_trace(self.query_id, len(self.tokens), len(self.token_entropies))

    @property
    def trace_id(self) -> str:
        return f"{self.query_id}/{self.model_id}"


@dataclass(frozen=True)
class AttentionBlock:
    """Flattened per-head attention vectors, row-major: shape (n_heads_total, dim)."""

    shape: tuple[int, int]
    data: tuple[float, ...]

    def __post_init__(self):
        if self.shape[0] * self.shape[1] != len(self.data):
            raise InvariantViolation(
                f"attention block: shape {self.shape} does not match data length {len(self.data)}"
            )

    def rows(self) -> list[tuple[float, ...]]:
        n, d = self.shape
        return [self.data[i * d : (i + 1) * d] for i in range(n)]


@dataclass(frozen=True)
class Verdict:
    query_id: str
    model_id: str
    label: VerdictLabel
    tier: Tier
    rationale: str = ""

    @property
    def trace_id(self) -> str:
        return f"{self.query_id}/{self.model_id}"


# --- queries CSV -------------------------------------------------------------


def load_queries(path: str | Path) -> list[QueryRecord]:
    """Read the queries CSV. Duplicate ids and invariant violations are errors."""
    records: list[QueryRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file") from None
        if [h.strip() for h in header] != QUERY_CSV_HEADER.split(","):
            raise ParseError(1, f"bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(lineno, f"expected 5 fields, got {len(row)}")
            query_id, text, category_s, status_s, answers_s = row
            if query_id in seen:
                raise DuplicateId(query_id)
            seen.add(query_id)
            try:
                category = Category(category_s)
            except ValueError:
                raise ParseError(lineno, f"unknown category {category_s!r}") from None
            try:
                status = TruthStatus(status_s)
            except ValueError:
                raise ParseError(lineno, f"unknown truth_status {status_s!r}") from None
            answers = tuple(a for a in answers_s.split("|") if a) if answers_s else ()
            records.append(QueryRecord(query_id, text, category, status, answers))
    return records


def _csv_field(value: str) -> str:
    if any(c in value for c in ',"\n\r'):
        return '"' + value.replace('"', '""') + '"'
    return value


def write_queries(records: Sequence[QueryRecord], path: str | Path) -> None:
    """Canonical writer: expected_answers always quoted, other fields minimally."""
    lines = [QUERY_CSV_HEADER]
    for r in records:
        answers = "|".join(r.expected_answers)
        lines.append(
            ",".join(
                [
                    _csv_field(r.query_id),
                    _csv_field(r.text),
                    r.category.value,
                    r.truth_status.value,
                    '"' + answers.replace('"', '""') + '"',
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- trace JSONL -------------------------------------------------------------


def _require(condition: bool, lineno: int, message: str) -> None:
    if not condition:
        raise ParseError(lineno, message)


def _parse_topk(raw, lineno: int):
    out = []
    for per_token in raw:
        pairs = []
        for entry in per_token:
            _require(isinstance(entry, list) and len(entry) == 2, lineno, "topk entry must be [token, logprob]")
            token, logprob = entry
            pairs.append((str(token), float(logprob)))
        out.append(tuple(pairs))
    return tuple(out)


def load_traces(path: str | Path, *, max_entropy_check: bool = True) -> list[GenerationTrace]:
    """Read Trace JSONL: a header line then one trace object per line.

    Entropy/token length mismatches and out-of-range entropies are hard
    errors; `topk_logprobs` rows must be sorted descending with total
    probability mass <= 1 + 1e-6.
    """
    traces: list[GenerationTrace] = []
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise ParseError(1, "missing header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ParseError(1, f"header is not JSON: {exc}") from None
        if header.get("schema") != TRACE_SCHEMA:
            raise SchemaVersionUnsupported(str(header.get("schema")))
        vocab_bound = header.get("vocab_size_bound")
        _require(isinstance(vocab_bound, int) and vocab_bound >= 1, 1, "vocab_size_bound must be a positive integer")
        entropy_cap = math.log(vocab_bound)

        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"not JSON: {exc}") from None
            for key in ("query_id", "model_id", "text", "tokens", "token_entropies", "is_abstention"):
                _require(key in obj, lineno, f"missing key {key!r}")
            query_id = str(obj["query_id"])
            tokens = tuple(str(t) for t in obj["tokens"])
            entropies = tuple(float(h) for h in obj["token_entropies"])
            if len(tokens) != len(entropies):
                raise LengthMismatch.for_trace(query_id, len(tokens), len(entropies))
            if max_entropy_check:
                for i, h in enumerate(entropies):
                    if h < 0.0 or h > entropy_cap + 1e-9:
                        raise EntropyOutOfRange(query_id, i, h)
            topk = None
            if obj.get("topk_logprobs") is not None:
                topk = _parse_topk(obj["topk_logprobs"], lineno)
                _require(len(topk) == len(tokens), lineno, "topk_logprobs length must match tokens")
                for per_token in topk:
                    lps = [lp for _, lp in per_token]
                    _require(all(lp <= 1e-12 for lp in lps), lineno, "logprobs must be <= 0")
                    _require(all(a >= b for a, b in zip(lps, lps[1:])), lineno, "logprobs must be sorted descending")
                    _require(math.fsum(math.exp(lp) for lp in lps) <= 1.0 + 1e-6, lineno, "topk mass exceeds 1")
            attention = None
            if obj.get("attention_summary") is not None:
                block = obj["attention_summary"]
                _require(
                    isinstance(block, dict) and "shape" in block and "data" in block,
                    lineno,
                    "attention_summary must carry shape and data",
                )
                shape = tuple(int(s) for s in block["shape"])
                _require(len(shape) == 2, lineno, "attention shape must be [n_heads_total, dim]")
                attention = AttentionBlock(shape, tuple(float(x) for x in block["data"]))
            traces.append(
                GenerationTrace(
                    query_id=query_id,
                    model_id=str(obj["model_id"]),
                    text=str(obj["text"]),
                    tokens=tokens,
                    token_entropies=entropies,
                    topk_logprobs=topk,
                    attention_summary=attention,
                    is_abstention=bool(obj["is_abstention"]),
                )
            )
    return traces


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _canonical_json(value) -> str:
    if isinstance(value, dict):
        inner = ",".join(f"{json.dumps(k)}:{_canonical_json(v)}" for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canonical_json(v) for v in value) + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt_float(value)
    if isinstance(value, int):
        return str(value)
    if value is None:
        return "null"
    return json.dumps(value, ensure_ascii=False)


def write_traces(traces: Sequence[GenerationTrace], path: str | Path, *, vocab_size_bound: int) -> None:
    """Canonical writer: fixed key order, floats at 17 significant digits."""
    lines = [_canonical_json({"schema": TRACE_SCHEMA, "vocab_size_bound": vocab_size_bound})]
    for t in traces:
        obj: dict = {
            "query_id": t.query_id,
            "model_id": t.model_id,
            "text": t.text,
            "tokens": list(t.tokens),
            "token_entropies": [float(h) for h in t.token_entropies],
        }
        if t.topk_logprobs is not None:
            obj["topk_logprobs"] = [
                [[tok, float(lp)] for tok, lp in per_token] for per_token in t.topk_logprobs
            ]
        if t.attention_summary is not None:
            obj["attention_summary"] = {
                "shape": list(t.attention_summary.shape),
                "data": [float(x) for x in t.attention_summary.data],
            }
        obj["is_abstention"] = t.is_abstention
        lines.append(_canonical_json(obj))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- joining -----------------------------------------------------------------


def join_traces(
    queries: Sequence[QueryRecord],
    traces: Sequence[GenerationTrace],
    *,
    strict: bool = True,
) -> dict[str, QueryRecord]:
    """Map each trace's query_id to its QueryRecord.

    In strict mode a trace whose query_id has no record is rejected.
    Returns the query index for downstream joins.
    """
    index = {q.query_id: q for q in queries}
    if strict:
        for t in traces:
            if t.query_id not in index:
                raise DanglingTrace(t.query_id)
    return index
