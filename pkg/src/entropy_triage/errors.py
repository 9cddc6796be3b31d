"""Exception types raised across the engine.

Every error carries enough context to locate the offending input (line
numbers, ids, indices) because the loaders reject rather than repair.
"""

from __future__ import annotations


class TriageError(Exception):
    """Base class for all engine errors."""


# --- ingestion -------------------------------------------------------------

class ParseError(TriageError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateId(TriageError):
    def __init__(self, query_id: str):
        super().__init__(f"duplicate query_id {query_id!r}")
        self.query_id = query_id


class InvariantViolation(TriageError):
    pass


class SchemaVersionUnsupported(TriageError):
    def __init__(self, schema: str):
        super().__init__(f"unsupported trace schema {schema!r}")
        self.schema = schema


class LengthMismatch(TriageError):
    def __init__(self, message: str, query_id: str | None = None):
        super().__init__(message)
        self.query_id = query_id

    @classmethod
    def for_trace(cls, query_id: str, n_tokens: int, n_entropies: int) -> "LengthMismatch":
        return cls(
            f"trace {query_id!r}: {n_tokens} tokens but {n_entropies} entropies",
            query_id,
        )


class EntropyOutOfRange(TriageError):
    def __init__(self, query_id: str, index: int, value: float):
        super().__init__(f"trace {query_id!r}: entropy[{index}] = {value} out of range")
        self.query_id = query_id
        self.index = index
        self.value = value


class DanglingTrace(TriageError):
    def __init__(self, query_id: str):
        super().__init__(f"trace {query_id!r} has no matching query record")
        self.query_id = query_id


# --- signal computation ----------------------------------------------------

class NotNormalized(TriageError):
    pass


class NegativeProbability(TriageError):
    pass


class Unsorted(TriageError):
    pass


class MassExceedsOne(TriageError):
    pass


# --- evaluation ------------------------------------------------------------

class WrongTier(TriageError):
    pass


class MisalignedSamples(TriageError):
    pass


class ClientUnavailable(TriageError):
    """Classifier backend unreachable or missing a transcript entry. Retryable."""


class UnparseableClassifierOutput(TriageError):
    def __init__(self, raw_reply: str):
        super().__init__(f"no verdict label in classifier reply: {raw_reply!r}")
        self.raw_reply = raw_reply


# --- judging and metrics ---------------------------------------------------

class EmptyCorpus(TriageError):
    pass


class CitationIndexUnavailable(TriageError):
    pass


class DegenerateClasses(TriageError):
    pass


class ConstantInput(TriageError):
    pass


class InconsistentCorpus(TriageError):
    pass


# --- formal simulation -----------------------------------------------------

class BadEpsilon(TriageError):
    pass


class CostModelViolatesRegime(TriageError):
    """The scenario's fabrication is verifiable within budget in some world,
    so the indistinguishability premise does not hold and the simulation
    refuses to run rather than produce a vacuous result."""


class ScenarioError(TriageError):
    pass


# --- topology --------------------------------------------------------------

class DimensionMismatch(TriageError):
    pass
