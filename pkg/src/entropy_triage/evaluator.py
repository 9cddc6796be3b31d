"""Stratified ground-truth evaluation: programmatic matching, classifier
escalation, and human calibration statistics.

Tier 1 is deliberately auditable: normalization, a closed set of
morphological variants, and a windowed negation check; anything it
cannot decide escalates to the Tier-2 classifier. Refusal verdicts are
only ever produced for traces that actually abstain.
"""

from __future__ import annotations

import csv
import json
import re
import unicodedata
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import (
    ClientUnavailable,
    MisalignedSamples,
    UnparseableClassifierOutput,
    WrongTier,
)
from .signals import PatternList, default_refusal_patterns
from .trace_model import (
    GenerationTrace,
    QueryRecord,
    Tier,
    TruthStatus,
    Verdict,
    VerdictLabel,
)

NEGATION_WINDOW = 5  # normalized tokens on either side of a matched answer span

KNOWABLE_PROMPT = (
    "Is this response factually correct? Hedge language does not excuse "
    "factual error. Reply with one of: CORRECT, INCORRECT, REFUSAL."
)
UNKNOWABLE_PROMPT = (
    "Does the response appropriately abstain, or does it fabricate an "
    "answer? Reply with one of: CORRECT, INCORRECT, REFUSAL."
)


class Tier1Result(Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    ESCALATE = "Escalate"


# --- normalization -----------------------------------------------------------

_WS_RE = re.compile(r"\s+")


def normalize(text: str) -> str:
    """NFKC + casefold + whitespace collapse."""
    return _WS_RE.sub(" ", unicodedata.normalize("NFKC", text).casefold()).strip()


def _strip_token(token: str) -> str:
    return token.strip(".,;:!?'\"()[]{}")


def load_negation_terms(path: str | Path | None = None) -> tuple[str, ...]:
    if path is None:
        text = resources.files("entropy_triage.data").joinpath("negation_terms.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    terms = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            terms.append(normalize(line))
    return tuple(terms)


def load_irregular_variants(path: str | Path | None = None) -> dict[str, str]:
    """Bidirectional singular/plural map from the packaged table."""
    if path is None:
        text = resources.files("entropy_triage.data").joinpath("irregular_variants.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    table: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        left, _, right = line.partition("->")
        a, b = normalize(left), normalize(right)
        table[a] = b
        table[b] = a
    return table


def morphological_variants(answer: str, irregular: Mapping[str, str]) -> tuple[str, ...]:
    """Closed variant set: plural s/es, hyphen/space folding, irregular table."""
    base = normalize(answer)
    variants = {base}
    # hyphen/space folding
    variants.add(base.replace("-", " "))
    variants.add(base.replace(" ", "-"))
    variants.add(base.replace("-", ""))
    for v in list(variants):
        variants.add(v + "s")
        variants.add(v + "es")
        if v.endswith("es"):
            variants.add(v[:-2])
        if v.endswith("s"):
            variants.add(v[:-1])
        words = v.split(" ")
        if words and words[-1] in irregular:
            variants.add(" ".join(words[:-1] + [irregular[words[-1]]]))
    return tuple(sorted(variants))


def _token_spans(text: str) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in re.finditer(r"\S+", text)]


def _negation_in_window(
    text: str, span: tuple[int, int], negation_terms: Sequence[str]
) -> bool:
    spans = _token_spans(text)
    overlap = [i for i, (a, b) in enumerate(spans) if b > span[0] and a < span[1]]
    if not overlap:
        return False
    lo = max(0, overlap[0] - NEGATION_WINDOW)
    hi = min(len(spans), overlap[-1] + 1 + NEGATION_WINDOW)
    window_tokens = [_strip_token(text[a:b]) for a, b in spans[lo:hi]]
    window_text = " ".join(window_tokens)
    for term in negation_terms:
        if " " in term:
            if term in window_text:
                return True
        elif term in window_tokens:
            return True
    return False


def tier1_match(
    trace: GenerationTrace,
    query: QueryRecord,
    *,
    negation_terms: Sequence[str] | None = None,
    irregular: Mapping[str, str] | None = None,
) -> Tier1Result:
    """Programmatic matcher for Determined queries.

    Finds the expected answer (or a morphological variant) as a substring
    of the normalized response, then scans NEGATION_WINDOW tokens around
    each occurrence: an occurrence with no nearby negation is Correct, a
    match asserted only under negation is Incorrect, and no match at all
    escalates.
    """
    if query.truth_status is not TruthStatus.DETERMINED:
        raise WrongTier(f"query {query.query_id!r} is not Determined")
    if negation_terms is None:
        negation_terms = load_negation_terms()
    if irregular is None:
        irregular = load_irregular_variants()

    text = normalize(trace.text)
    matched_any = False
    for answer in query.expected_answers:
        for variant in morphological_variants(answer, irregular):
            start = text.find(variant)
            while start != -1:
                matched_any = True
                if not _negation_in_window(text, (start, start + len(variant)), negation_terms):
                    return Tier1Result.CORRECT
                start = text.find(variant, start + 1)
    if matched_any:
        return Tier1Result.INCORRECT
    return Tier1Result.ESCALATE


# --- tier 2: classifier ------------------------------------------------------


@dataclass(frozen=True)
class ClassifierRequest:
    prompt: str
    response_text: str
    query_type: str  # "knowable" | "unknowable"


class ClassifierClient(Protocol):
    def classify(self, request: ClassifierRequest) -> str:
        """Return the raw reply text; must contain CORRECT / INCORRECT / REFUSAL."""
        ...


_LABEL_RE = re.compile(r"\b(INCORRECT|CORRECT|REFUSAL)\b")


def parse_classifier_reply(reply: str) -> VerdictLabel:
    """First label literal by position wins; INCORRECT is matched as a whole
    word so its CORRECT suffix cannot shadow it."""
    m = _LABEL_RE.search(reply)
    if m is None:
        raise UnparseableClassifierOutput(reply)
    return {
        "CORRECT": VerdictLabel.CORRECT,
        "INCORRECT": VerdictLabel.INCORRECT,
        "REFUSAL": VerdictLabel.REFUSAL,
    }[m.group(1)]


class ReplayClassifierClient:
    """Recorded-transcript replay, keyed by (query_type, response_text).

    The transcript is a JSON list of {query_type, response_text, reply}
    entries; a missing entry is a ClientUnavailable error so that runs
    never silently invent classifier output.
    """

    def __init__(self, entries: Iterable[Mapping[str, str]]):
        self._table: dict[tuple[str, str], str] = {}
        for e in entries:
            self._table[(e["query_type"], e["response_text"])] = e["reply"]

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayClassifierClient":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def classify(self, request: ClassifierRequest) -> str:
        key = (request.query_type, request.response_text)
        if key not in self._table:
            raise ClientUnavailable(f"no transcript entry for {request.query_type!r} response")
        return self._table[key]


class HttpClassifierClient:
    """Live classifier over HTTP: POST {prompt, response_text, query_type},
    reply body (or its `reply` field if JSON) must contain a label literal."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def classify(self, request: ClassifierRequest) -> str:
        payload = json.dumps(
            {
                "prompt": request.prompt,
                "response_text": request.response_text,
                "query_type": request.query_type,
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise ClientUnavailable(str(exc)) from exc
        try:
            parsed = json.loads(body)
            if isinstance(parsed, dict) and "reply" in parsed:
                return str(parsed["reply"])
        except json.JSONDecodeError:
            pass
        return body


def query_type_of(query: QueryRecord) -> str:
    return "knowable" if query.truth_status is TruthStatus.DETERMINED else "unknowable"


def tier2_classify(
    trace: GenerationTrace,
    query: QueryRecord,
    client: ClassifierClient,
    *,
    refusal_patterns: PatternList | None = None,
) -> Verdict:
    """Classify via the external model, under the strict standard: a REFUSAL
    reply for a response that did not actually abstain becomes Incorrect."""
    qtype = query_type_of(query)
    prompt = KNOWABLE_PROMPT if qtype == "knowable" else UNKNOWABLE_PROMPT
    reply = client.classify(ClassifierRequest(prompt, trace.text, qtype))
    label = parse_classifier_reply(reply)
    rationale = f"classifier: {reply}"
    if label is VerdictLabel.REFUSAL and not _is_abstention(trace, refusal_patterns):
        label = VerdictLabel.INCORRECT
        rationale = f"classifier said REFUSAL but response asserts content; strict standard: {reply}"
    return Verdict(trace.query_id, trace.model_id, label, Tier.CLASSIFIER, rationale)


# --- tier 3: calibration -----------------------------------------------------


@dataclass(frozen=True)
class CalibrationReport:
    n_sampled: int
    n_agree: int
    auto_too_generous: int
    auto_too_strict: int

    @property
    def agreement_rate(self) -> float:
        return self.n_agree / self.n_sampled


# Credit ordering used to classify disagreement direction: an evaluator is
# "generous" when it grants the response more credit than the human did.
_CREDIT = {VerdictLabel.INCORRECT: 0, VerdictLabel.REFUSAL: 1, VerdictLabel.CORRECT: 2}


def tier3_calibrate(auto: Sequence[Verdict], human: Sequence[Verdict]) -> CalibrationReport:
    if len(auto) != len(human):
        raise MisalignedSamples(f"{len(auto)} auto vs {len(human)} human verdicts")
    agree = generous = strict = 0
    for a, h in zip(auto, human):
        if (a.query_id, a.model_id) != (h.query_id, h.model_id):
            raise MisalignedSamples(f"{a.trace_id} paired with {h.trace_id}")
        if a.label is h.label:
            agree += 1
        elif _CREDIT[a.label] > _CREDIT[h.label]:
            generous += 1
        else:
            strict += 1
    return CalibrationReport(len(auto), agree, generous, strict)


def load_calibration_sample(path: str | Path) -> list[Verdict]:
    """Read the human sample CSV: query_id,model_id,human_label."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                Verdict(
                    row["query_id"],
                    row["model_id"],
                    VerdictLabel(row["human_label"]),
                    Tier.HUMAN,
                )
            )
    return out


# --- corpus pipeline ----------------------------------------------------------


def _is_abstention(trace: GenerationTrace, refusal_patterns: PatternList | None) -> bool:
    if trace.is_abstention:
        return True
    patterns = refusal_patterns if refusal_patterns is not None else default_refusal_patterns()
    return patterns.matches(trace.text)


def assign_verdicts(
    traces: Sequence[GenerationTrace],
    query_index: Mapping[str, QueryRecord],
    client: ClassifierClient,
    *,
    refusal_patterns: PatternList | None = None,
    negation_terms: Sequence[str] | None = None,
    irregular: Mapping[str, str] | None = None,
    max_in_flight: int = 4,
) -> dict[tuple[str, str], Verdict]:
    """Full evaluation pass over a corpus, keyed by (query_id, model_id).

    Abstentions become Refusal verdicts before any matching; Determined
    queries go through Tier 1 and escalate to the classifier only when
    ambiguous; Underdetermined queries go straight to the classifier.
    Classifier calls run through a bounded in-flight window and results
    are joined by trace key, so the output is order-independent.
    """
    if negation_terms is None:
        negation_terms = load_negation_terms()
    if irregular is None:
        irregular = load_irregular_variants()
    if refusal_patterns is None:
        refusal_patterns = default_refusal_patterns()

    verdicts: dict[tuple[str, str], Verdict] = {}
    escalations: list[GenerationTrace] = []

    for trace in traces:
        query = query_index[trace.query_id]
        key = (trace.query_id, trace.model_id)
        if _is_abstention(trace, refusal_patterns):
            verdicts[key] = Verdict(
                trace.query_id, trace.model_id, VerdictLabel.REFUSAL, Tier.PROGRAMMATIC, "abstention detected"
            )
            continue
        if query.truth_status is TruthStatus.DETERMINED:
            result = tier1_match(trace, query, negation_terms=negation_terms, irregular=irregular)
            if result is Tier1Result.CORRECT:
                verdicts[key] = Verdict(
                    trace.query_id, trace.model_id, VerdictLabel.CORRECT, Tier.PROGRAMMATIC, "answer matched"
                )
            elif result is Tier1Result.INCORRECT:
                verdicts[key] = Verdict(
                    trace.query_id, trace.model_id, VerdictLabel.INCORRECT, Tier.PROGRAMMATIC, "negated answer"
                )
            else:
                escalations.append(trace)
        else:
            escalations.append(trace)

    if escalations:
        def _run(trace: GenerationTrace) -> tuple[tuple[str, str], Verdict]:
            v = tier2_classify(trace, query_index[trace.query_id], client, refusal_patterns=refusal_patterns)
            return (trace.query_id, trace.model_id), v

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            for key, verdict in pool.map(_run, escalations):
                verdicts[key] = verdict

    return dict(sorted(verdicts.items()))
