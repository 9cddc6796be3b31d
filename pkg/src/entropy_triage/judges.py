"""Judge strategies and the budget-bounded verification loop.

A judge only ever decides *which* traces get the expensive check; the
check itself is a VerificationOracle. Intervention replaces a verified
fabrication on an unknowable query with abstention and never touches
anything else, which is what makes accuracy monotone in budget.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import CitationIndexUnavailable, EmptyCorpus, InvariantViolation
from .evaluator import normalize
from .signals import SignalVector
from .trace_model import Category, Tier, TruthStatus, Verdict, VerdictLabel


class StrategyKind(Enum):
    NO_JUDGE = "nojudge"
    TEXT_LENGTH = "text"
    TENSOR_ENTROPY = "tensor"
    COMPOSED = "composed"


class EntropyScore(Enum):
    MEAN = "mean"
    MAX = "max"


@dataclass(frozen=True)
class JudgeStrategy:
    kind: StrategyKind
    budget_fraction: float = 0.0
    entropy_score: EntropyScore = EntropyScore.MEAN
    citation_router: bool = False

    def __post_init__(self):
        if not 0.0 <= self.budget_fraction <= 1.0:
            raise InvariantViolation(f"budget_fraction {self.budget_fraction} outside [0,1]")
        if self.kind is StrategyKind.COMPOSED and not self.citation_router:
            raise InvariantViolation("composed strategy requires the citation router")


@dataclass(frozen=True)
class JudgeOutcome:
    query_id: str
    model_id: str
    selected_for_verification: bool
    intervened: bool
    final_label: VerdictLabel
    rank_score: float

    def __post_init__(self):
        if self.intervened and not self.selected_for_verification:
            raise InvariantViolation("intervention outside the verified set")


class RoutePath(Enum):
    ENTROPY = "EntropyPath"
    CITATION_LOOKUP = "CitationLookupPath"


def composed_route(category: Category) -> RoutePath:
    return RoutePath.CITATION_LOOKUP if category is Category.CITATION else RoutePath.ENTROPY


def _entropy_of(sv: SignalVector, score: EntropyScore) -> float:
    return sv.mean_entropy if score is EntropyScore.MEAN else sv.max_entropy


def rank_for_verification(
    signals: Mapping[tuple[str, str], SignalVector],
    strategy: JudgeStrategy,
    *,
    categories: Mapping[str, Category] | None = None,
) -> list[tuple[tuple[str, str], float]]:
    """Full suspicion ordering, most suspect first.

    Text ranks by response length, tensor by the chosen entropy
    aggregate. The composed judge inverts the entropy score on citation
    traces (confident citations are the suspect ones) by reflecting it
    across the corpus score range, so both routes compete on one scale.
    Ties break on (query_id, model_id) ascending.
    """
    if not signals:
        raise EmptyCorpus("no signals to rank")
    if strategy.kind is StrategyKind.NO_JUDGE:
        raise InvariantViolation("the no-judge baseline has no ranking")

    def raw_score(sv: SignalVector) -> float:
        if strategy.kind is StrategyKind.TEXT_LENGTH:
            return float(sv.response_length)
        return _entropy_of(sv, strategy.entropy_score)

    scores = {key: raw_score(sv) for key, sv in signals.items()}
    if strategy.kind is StrategyKind.COMPOSED:
        if categories is None:
            raise InvariantViolation("composed ranking needs query categories")
        lo = min(scores.values())
        hi = max(scores.values())
        for (qid, mid), s in scores.items():
            if composed_route(categories[qid]) is RoutePath.CITATION_LOOKUP:
                scores[(qid, mid)] = lo + hi - s

    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


class VerificationOracle(Protocol):
    """Source of ground truth for verified traces.

    `verify` may return None when the check exceeds the oracle's budget
    (the cost-bounded simulator does this); `raw_verdict` is the
    unverified outcome every trace carries into the run.
    """

    def raw_verdict(self, key: tuple[str, str]) -> Verdict: ...

    def verify(self, key: tuple[str, str]) -> Verdict | None: ...

    def truth_status(self, query_id: str) -> TruthStatus: ...


@dataclass(frozen=True)
class CorpusOracle:
    """Oracle backed by the evaluator's verdicts: verification at full cost
    always succeeds and returns the recorded verdict."""

    verdicts: Mapping[tuple[str, str], Verdict]
    truth: Mapping[str, TruthStatus]

    def raw_verdict(self, key: tuple[str, str]) -> Verdict:
        return self.verdicts[key]

    def verify(self, key: tuple[str, str]) -> Verdict | None:
        return self.verdicts[key]

    def truth_status(self, query_id: str) -> TruthStatus:
        return self.truth[query_id]


def budget_count(n: int, budget_fraction: float) -> int:
    # floor: never exceed the stated budget
    return math.floor(budget_fraction * n + 1e-12)


def apply_budget(
    ranking: Sequence[tuple[tuple[str, str], float]],
    budget_fraction: float,
    oracle: VerificationOracle,
) -> list[JudgeOutcome]:
    """Verify the top floor(budget * N) traces and intervene on verified
    fabrications: Incorrect on an Underdetermined query becomes Refusal.
    Unselected traces keep their raw verdict."""
    if not 0.0 <= budget_fraction <= 1.0:
        raise InvariantViolation(f"budget_fraction {budget_fraction} outside [0,1]")
    n_selected = budget_count(len(ranking), budget_fraction)
    outcomes = []
    for i, (key, score) in enumerate(ranking):
        selected = i < n_selected
        verdict = oracle.raw_verdict(key)
        intervened = False
        label = verdict.label
        if selected:
            checked = oracle.verify(key)
            if (
                checked is not None
                and checked.label is VerdictLabel.INCORRECT
                and oracle.truth_status(key[0]) is TruthStatus.UNDERDETERMINED
            ):
                label = VerdictLabel.REFUSAL
                intervened = True
            elif checked is not None:
                label = checked.label
        outcomes.append(
            JudgeOutcome(
                query_id=key[0],
                model_id=key[1],
                selected_for_verification=selected,
                intervened=intervened,
                final_label=label,
                rank_score=score,
            )
        )
    return outcomes


def baseline_outcomes(oracle: CorpusOracle) -> list[JudgeOutcome]:
    """No-judge condition: every trace keeps its raw verdict."""
    outcomes = []
    for key in sorted(oracle.verdicts):
        verdict = oracle.raw_verdict(key)
        outcomes.append(
            JudgeOutcome(
                query_id=key[0],
                model_id=key[1],
                selected_for_verification=False,
                intervened=False,
                final_label=verdict.label,
                rank_score=0.0,
            )
        )
    return outcomes


@dataclass(frozen=True)
class CitationVerifyingOracle:
    """Composed-judge oracle: citation-category traces are verified through
    the bounded lookup index, everything else through the base oracle.

    A missing index record on an asserted citation is a verified
    fabrication; abstentions have nothing to look up and keep their
    verdict either way.
    """

    base: "CorpusOracle"
    index: "CitationIndex"
    categories: Mapping[str, Category]
    texts: Mapping[tuple[str, str], str]

    def raw_verdict(self, key: tuple[str, str]) -> Verdict:
        return self.base.raw_verdict(key)

    def truth_status(self, query_id: str) -> TruthStatus:
        return self.base.truth_status(query_id)

    def verify(self, key: tuple[str, str]) -> Verdict | None:
        if composed_route(self.categories[key[0]]) is RoutePath.ENTROPY:
            return self.base.verify(key)
        raw = self.base.raw_verdict(key)
        if raw.label is VerdictLabel.REFUSAL:
            return raw
        reply = self.index.lookup(extract_citation_ref(self.texts[key]))
        if reply.exists:
            return raw
        return Verdict(key[0], key[1], VerdictLabel.INCORRECT, Tier.PROGRAMMATIC, "cited source not found in index")


# --- citation lookup -----------------------------------------------------------


@dataclass(frozen=True)
class CitationQuery:
    title: str | None = None
    doi: str | None = None
    authors: str | None = None
    year: int | None = None


@dataclass(frozen=True)
class CitationReply:
    exists: bool
    matched_record: dict | None = None


class CitationIndex(Protocol):
    def lookup(self, query: CitationQuery) -> CitationReply: ...


class FileCitationIndex:
    """Test implementation backed by a CSV of known records
    (title,doi,authors,year). Matches on DOI, else normalized title."""

    def __init__(self, records: Iterable[Mapping[str, str]]):
        self._by_doi: dict[str, dict] = {}
        self._by_title: dict[str, dict] = {}
        for r in records:
            rec = dict(r)
            if rec.get("doi"):
                self._by_doi[rec["doi"].lower()] = rec
            if rec.get("title"):
                self._by_title[normalize(rec["title"])] = rec

    @classmethod
    def from_file(cls, path: str | Path) -> "FileCitationIndex":
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                return cls(list(csv.DictReader(fh)))
        except OSError as exc:
            raise CitationIndexUnavailable(str(exc)) from exc

    def lookup(self, query: CitationQuery) -> CitationReply:
        if query.doi and query.doi.lower() in self._by_doi:
            return CitationReply(True, self._by_doi[query.doi.lower()])
        if query.title and normalize(query.title) in self._by_title:
            return CitationReply(True, self._by_title[normalize(query.title)])
        return CitationReply(False)


_DOI_RE = re.compile(r"\b10\.\d{4,9}/[^\s\"',;]+")
_YEAR_RE = re.compile(r"\b(19|20)\d{2}\b")
_QUOTED_RE = re.compile(r"[\"“]([^\"”]{4,200})[\"”]")
_AUTHORS_RE = re.compile(r"\b([A-Z][\w-]+(?:\s+(?:et al\.?|and\s+[A-Z][\w-]+))?)\s*\(")


def extract_citation_ref(text: str) -> CitationQuery:
    """Heuristic reference extraction from a response: DOI, quoted title,
    leading author before a parenthetical, four-digit year."""
    doi = _DOI_RE.search(text)
    title = _QUOTED_RE.search(text)
    year = _YEAR_RE.search(text)
    authors = _AUTHORS_RE.search(text)
    return CitationQuery(
        title=title.group(1).strip() if title else None,
        doi=doi.group(0).rstrip(".") if doi else None,
        authors=authors.group(1) if authors else None,
        year=int(year.group(0)) if year else None,
    )
