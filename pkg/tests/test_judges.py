from __future__ import annotations

import random

import pytest

from entropy_triage.errors import EmptyCorpus, InvariantViolation
from entropy_triage.judges import (
    CitationQuery,
    CitationVerifyingOracle,
    CorpusOracle,
    EntropyScore,
    FileCitationIndex,
    JudgeOutcome,
    JudgeStrategy,
    RoutePath,
    StrategyKind,
    apply_budget,
    baseline_outcomes,
    budget_count,
    composed_route,
    extract_citation_ref,
    rank_for_verification,
)
from entropy_triage.metrics import accuracy
from entropy_triage.signals import SignalVector
from entropy_triage.trace_model import Category, Tier, TruthStatus, Verdict, VerdictLabel


def sv(mean=1.0, mx=None, length=10):
    return SignalVector(
        mean_entropy=mean,
        max_entropy=mx if mx is not None else mean + 0.5,
        entropy_std=0.1,
        spike_count=0,
        response_length=length,
        hedge_flag=False,
        refusal_flag=False,
    )


def key(qid, mid="m"):
    return (qid, mid)


def test_text_length_ranks_longest_first():
    signals = {key("a"): sv(length=10), key("b"): sv(length=50), key("c"): sv(length=30)}
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TEXT_LENGTH, 0.1))
    assert [k[0] for k, _ in ranking] == ["b", "c", "a"]


def test_tie_breaks_lexicographic():
    signals = {key("b"): sv(mean=2.0), key("a"): sv(mean=2.0)}
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 0.1))
    assert [k[0] for k, _ in ranking] == ["a", "b"]


def test_tensor_ranks_high_entropy_first():
    signals = {key("a"): sv(mean=0.13), key("b"): sv(mean=2.1), key("c"): sv(mean=1.4)}
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 0.1))
    assert ranking[0][0][0] == "b"
    assert ranking[0][1] == 2.1


def test_max_entropy_score_selection():
    signals = {key("a"): sv(mean=0.5, mx=9.0), key("b"): sv(mean=2.0, mx=2.1)}
    strategy = JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 0.1, entropy_score=EntropyScore.MAX)
    ranking = rank_for_verification(signals, strategy)
    assert ranking[0][0][0] == "a"


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        rank_for_verification({}, JudgeStrategy(StrategyKind.TEXT_LENGTH, 0.1))


def test_nojudge_has_no_ranking():
    with pytest.raises(InvariantViolation):
        rank_for_verification({key("a"): sv()}, JudgeStrategy(StrategyKind.NO_JUDGE))


def test_strategy_invariants():
    with pytest.raises(InvariantViolation):
        JudgeStrategy(StrategyKind.COMPOSED, 0.1, citation_router=False)
    with pytest.raises(InvariantViolation):
        JudgeStrategy(StrategyKind.TEXT_LENGTH, 1.5)


def test_composed_route_paths():
    assert composed_route(Category.CITATION) is RoutePath.CITATION_LOOKUP
    assert composed_route(Category.CONTROL) is RoutePath.ENTROPY


def test_composed_inverts_citation_scores():
    signals = {
        key("cit_low"): sv(mean=0.2),
        key("cit_high"): sv(mean=1.5),
        key("gen"): sv(mean=1.0),
    }
    categories = {"cit_low": Category.CITATION, "cit_high": Category.CITATION, "gen": Category.CONTROL}
    strategy = JudgeStrategy(StrategyKind.COMPOSED, 0.1, citation_router=True)
    ranking = rank_for_verification(signals, strategy, categories=categories)
    position = {k[0]: i for i, (k, _) in enumerate(ranking)}
    assert position["cit_low"] < position["cit_high"]


def _corpus():
    """10-trace fixture: 5 knowable (4 correct), 5 unknowable (2 refusals,
    3 fabrications)."""
    verdicts = {}
    truth = {}
    signals = {}
    rows = [
        ("k1", TruthStatus.DETERMINED, VerdictLabel.CORRECT, 0.2),
        ("k2", TruthStatus.DETERMINED, VerdictLabel.CORRECT, 0.3),
        ("k3", TruthStatus.DETERMINED, VerdictLabel.CORRECT, 0.4),
        ("k4", TruthStatus.DETERMINED, VerdictLabel.CORRECT, 0.5),
        ("k5", TruthStatus.DETERMINED, VerdictLabel.INCORRECT, 0.6),
        ("u1", TruthStatus.UNDERDETERMINED, VerdictLabel.REFUSAL, 1.1),
        ("u2", TruthStatus.UNDERDETERMINED, VerdictLabel.REFUSAL, 1.2),
        ("u3", TruthStatus.UNDERDETERMINED, VerdictLabel.INCORRECT, 2.0),
        ("u4", TruthStatus.UNDERDETERMINED, VerdictLabel.INCORRECT, 2.2),
        ("u5", TruthStatus.UNDERDETERMINED, VerdictLabel.INCORRECT, 2.4),
    ]
    for qid, status, label, mean in rows:
        truth[qid] = status
        verdicts[key(qid)] = Verdict(qid, "m", label, Tier.PROGRAMMATIC)
        signals[key(qid)] = sv(mean=mean)
    return signals, CorpusOracle(verdicts, truth), truth


def test_budget_zero_equals_baseline():
    signals, oracle, truth = _corpus()
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 0.0))
    outcomes = apply_budget(ranking, 0.0, oracle)
    assert not any(o.selected_for_verification for o in outcomes)
    assert accuracy(outcomes, truth) == accuracy(baseline_outcomes(oracle), truth)


def test_full_budget_perfect_oracle_enumeration():
    # hand enumeration: 4 correct knowable + all 5 unknowable = 9/10
    signals, oracle, truth = _corpus()
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 1.0))
    outcomes = apply_budget(ranking, 1.0, oracle)
    assert accuracy(outcomes, truth) == pytest.approx(0.9)
    assert sum(o.intervened for o in outcomes) == 3


def test_floor_rule_selects_exact_count():
    assert budget_count(800, 0.1) == 80
    assert budget_count(10, 0.25) == 2
    assert budget_count(7, 0.1) == 0
    assert budget_count(10, 0.3) == 3


def test_intervention_only_on_selected():
    signals, oracle, truth = _corpus()
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 0.2))
    outcomes = apply_budget(ranking, 0.2, oracle)
    selected = [o for o in outcomes if o.selected_for_verification]
    assert len(selected) == 2
    # top two by entropy are u5 (2.4) and u4 (2.2): both fabrications
    assert {o.query_id for o in selected} == {"u4", "u5"}
    assert all(o.intervened and o.final_label is VerdictLabel.REFUSAL for o in selected)


def test_monotone_budget_property():
    signals, oracle, truth = _corpus()
    rng = random.Random(0)
    for kind in (StrategyKind.TENSOR_ENTROPY, StrategyKind.TEXT_LENGTH):
        ranking = rank_for_verification(signals, JudgeStrategy(kind, 0.1))
        budgets = sorted(rng.uniform(0, 1) for _ in range(10))
        accs = [accuracy(apply_budget(ranking, b, oracle), truth) for b in budgets]
        assert all(b >= a for a, b in zip(accs, accs[1:]))


def test_outcomes_deterministic():
    signals, oracle, _ = _corpus()
    ranking = rank_for_verification(signals, JudgeStrategy(StrategyKind.TENSOR_ENTROPY, 0.3))
    first = apply_budget(ranking, 0.3, oracle)
    second = apply_budget(list(ranking), 0.3, oracle)
    assert first == second


def test_outcome_invariant():
    with pytest.raises(InvariantViolation):
        JudgeOutcome("q", "m", selected_for_verification=False, intervened=True, final_label=VerdictLabel.REFUSAL, rank_score=0.0)


# --- citation index ---------------------------------------------------------------


INDEX_CSV = """title,doi,authors,year
Attention Is All You Need,10.5555/3295222,Vaswani et al.,2017
A Study of Decay,10.1000/decay.2021,Yamamoto,2021
"""


def test_file_citation_index_lookup(tmp_path):
    path = tmp_path / "index.csv"
    path.write_text(INDEX_CSV, encoding="utf-8")
    index = FileCitationIndex.from_file(path)
    assert index.lookup(CitationQuery(doi="10.1000/decay.2021")).exists
    assert index.lookup(CitationQuery(title="attention is all you need")).exists
    assert not index.lookup(CitationQuery(title="Completely Invented Title")).exists


def test_extract_citation_ref():
    text = 'See Yamamoto (2021), "A Study of Decay", doi:10.1000/decay.2021.'
    ref = extract_citation_ref(text)
    assert ref.doi == "10.1000/decay.2021"
    assert ref.title == "A Study of Decay"
    assert ref.year == 2021


def test_citation_oracle_flags_missing_source(tmp_path):
    path = tmp_path / "index.csv"
    path.write_text(INDEX_CSV, encoding="utf-8")
    index = FileCitationIndex.from_file(path)
    truth = {"c1": TruthStatus.UNDERDETERMINED, "k1": TruthStatus.DETERMINED}
    verdicts = {
        key("c1"): Verdict("c1", "m", VerdictLabel.INCORRECT, Tier.CLASSIFIER),
        key("k1"): Verdict("k1", "m", VerdictLabel.CORRECT, Tier.PROGRAMMATIC),
    }
    oracle = CitationVerifyingOracle(
        CorpusOracle(verdicts, truth),
        index,
        {"c1": Category.CITATION, "k1": Category.CONTROL},
        {key("c1"): 'As shown in "Ghost Paper of 2020" (2020).', key("k1"): "Paris."},
    )
    checked = oracle.verify(key("c1"))
    assert checked.label is VerdictLabel.INCORRECT
    assert oracle.verify(key("k1")).label is VerdictLabel.CORRECT
