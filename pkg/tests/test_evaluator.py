from __future__ import annotations

import unicodedata

import pytest

from entropy_triage.errors import (
    ClientUnavailable,
    MisalignedSamples,
    UnparseableClassifierOutput,
    WrongTier,
)
from entropy_triage.evaluator import (
    CalibrationReport,
    ReplayClassifierClient,
    Tier1Result,
    assign_verdicts,
    load_calibration_sample,
    morphological_variants,
    load_irregular_variants,
    normalize,
    parse_classifier_reply,
    tier1_match,
    tier2_classify,
    tier3_calibrate,
)
from entropy_triage.trace_model import (
    Category,
    QueryRecord,
    Tier,
    TruthStatus,
    Verdict,
    VerdictLabel,
)

from conftest import make_trace


def q(query_id, answers, category=Category.CONTROL):
    status = TruthStatus.DETERMINED if answers else TruthStatus.UNDERDETERMINED
    return QueryRecord(query_id, f"about {query_id}", category, status, tuple(answers))


# --- tier 1 -------------------------------------------------------------------


def test_exact_substring_is_correct(paris_query):
    trace = make_trace(text="The capital of France is Paris.")
    assert tier1_match(trace, paris_query) is Tier1Result.CORRECT


def test_negated_answer_is_incorrect():
    query = q("g1", ["Glavinsky syndrome"])
    trace = make_trace(query_id="g1", text="Glavinsky syndrome is not a real syndrome")
    assert tier1_match(trace, query) is Tier1Result.INCORRECT


def test_no_match_escalates(paris_query):
    trace = make_trace(text="It is a large European city.")
    assert tier1_match(trace, paris_query) is Tier1Result.ESCALATE


def test_wrong_tier_on_underdetermined(unknowable_query):
    with pytest.raises(WrongTier):
        tier1_match(make_trace(query_id="q101"), unknowable_query)


def test_tier1_invariant_under_nfkc_and_case(paris_query):
    fullwidth = "The capital is Ｐａｒｉｓ."  # fullwidth "Paris"
    assert tier1_match(make_trace(text=fullwidth), paris_query) is Tier1Result.CORRECT
    decomposed = unicodedata.normalize("NFD", "The capital is PARIS.")
    assert tier1_match(make_trace(text=decomposed), paris_query) is Tier1Result.CORRECT


def test_morphological_plural_match():
    query = q("w1", ["cube"])
    trace = make_trace(query_id="w1", text="Wombats produce cubes, oddly.")
    assert tier1_match(trace, query) is Tier1Result.CORRECT


def test_irregular_plural_match():
    query = q("m1", ["mouse"])
    trace = make_trace(query_id="m1", text="There were mice in the walls.")
    assert tier1_match(trace, query) is Tier1Result.CORRECT


def test_hyphen_space_folding():
    query = q("h1", ["well known"])
    trace = make_trace(query_id="h1", text="It is a well-known result.")
    assert tier1_match(trace, query) is Tier1Result.CORRECT


def test_negation_outside_window_is_correct():
    query = q("p1", ["Paris"])
    # the negation sits more than 5 tokens after the answer span
    text = "Paris is the capital of France and there is absolutely no doubt here."
    assert tier1_match(make_trace(query_id="p1", text=text), query) is Tier1Result.CORRECT


def test_multiword_negation_detected():
    query = q("g2", ["Glavinsky"])
    trace = make_trace(query_id="g2", text="That so-called Glavinsky study does not exist at all.")
    assert tier1_match(trace, query) is Tier1Result.INCORRECT


def test_variant_table_is_bidirectional():
    table = load_irregular_variants()
    assert table["mouse"] == "mice" and table["mice"] == "mouse"
    variants = morphological_variants("house mouse", table)
    assert "house mice" in variants


# --- tier 2 -------------------------------------------------------------------


def test_parse_reply_first_label_wins():
    assert parse_classifier_reply("Verdict: INCORRECT (not CORRECT)") is VerdictLabel.INCORRECT
    assert parse_classifier_reply("CORRECT - the answer matches") is VerdictLabel.CORRECT
    assert parse_classifier_reply("...REFUSAL") is VerdictLabel.REFUSAL


def test_parse_reply_unparseable():
    with pytest.raises(UnparseableClassifierOutput):
        parse_classifier_reply("no verdict here")


def test_tier2_abstention_on_unknowable(unknowable_query):
    client = ReplayClassifierClient(
        [{"query_type": "unknowable", "response_text": "I cannot know that.", "reply": "REFUSAL"}]
    )
    trace = make_trace(query_id="q101", text="I cannot know that.")
    verdict = tier2_classify(trace, unknowable_query, client)
    assert verdict.label is VerdictLabel.REFUSAL
    assert verdict.tier is Tier.CLASSIFIER


def test_tier2_hedged_fabrication_is_incorrect(unknowable_query):
    text = "I'm not certain, but it was 1973."
    client = ReplayClassifierClient(
        [{"query_type": "unknowable", "response_text": text, "reply": "INCORRECT"}]
    )
    verdict = tier2_classify(make_trace(query_id="q101", text=text), unknowable_query, client)
    assert verdict.label is VerdictLabel.INCORRECT


def test_tier2_strict_standard_blocks_refusal_label(unknowable_query):
    # classifier says REFUSAL for a response that plainly asserts content
    text = "I'd rather not say, but it was 1973 for sure."
    client = ReplayClassifierClient(
        [{"query_type": "unknowable", "response_text": text, "reply": "REFUSAL"}]
    )
    verdict = tier2_classify(make_trace(query_id="q101", text=text), unknowable_query, client)
    assert verdict.label is VerdictLabel.INCORRECT
    assert "strict" in verdict.rationale


def test_replay_missing_entry_raises(unknowable_query):
    client = ReplayClassifierClient([])
    with pytest.raises(ClientUnavailable):
        tier2_classify(make_trace(query_id="q101", text="hm"), unknowable_query, client)


# --- tier 3 -------------------------------------------------------------------


def _verdicts(labels, who):
    return [
        Verdict(f"q{i:03d}", "m", label, Tier.CLASSIFIER if who == "auto" else Tier.HUMAN)
        for i, label in enumerate(labels)
    ]


def test_calibration_counts_and_rate():
    auto = [VerdictLabel.CORRECT] * 75 + [VerdictLabel.CORRECT, VerdictLabel.REFUSAL] + [VerdictLabel.INCORRECT] * 3
    human = [VerdictLabel.CORRECT] * 75 + [VerdictLabel.INCORRECT] * 2 + [VerdictLabel.CORRECT] * 3
    report = tier3_calibrate(_verdicts(auto, "auto"), _verdicts(human, "human"))
    assert report == CalibrationReport(80, 75, 2, 3)
    assert report.agreement_rate == 0.9375
    assert report.n_agree + report.auto_too_generous + report.auto_too_strict == report.n_sampled


def test_calibration_identical_lists():
    auto = _verdicts([VerdictLabel.CORRECT, VerdictLabel.REFUSAL], "auto")
    human = _verdicts([VerdictLabel.CORRECT, VerdictLabel.REFUSAL], "human")
    assert tier3_calibrate(auto, human).agreement_rate == 1.0


def test_calibration_length_mismatch():
    with pytest.raises(MisalignedSamples):
        tier3_calibrate(_verdicts([VerdictLabel.CORRECT], "auto"), _verdicts([], "human"))


def test_calibration_id_mismatch():
    auto = [Verdict("qa", "m", VerdictLabel.CORRECT, Tier.CLASSIFIER)]
    human = [Verdict("qb", "m", VerdictLabel.CORRECT, Tier.HUMAN)]
    with pytest.raises(MisalignedSamples):
        tier3_calibrate(auto, human)


def test_load_calibration_sample(tmp_path):
    path = tmp_path / "sample.csv"
    path.write_text("query_id,model_id,human_label\nq001,m,Correct\nq002,m,Refusal\n", encoding="utf-8")
    sample = load_calibration_sample(path)
    assert [v.label for v in sample] == [VerdictLabel.CORRECT, VerdictLabel.REFUSAL]
    assert all(v.tier is Tier.HUMAN for v in sample)


# --- pipeline -----------------------------------------------------------------


def test_assign_verdicts_pipeline(paris_query, unknowable_query):
    traces = [
        make_trace(text="It is Paris."),
        make_trace(query_id="q101", model_id="model-a", text="It concluded decay doubles."),
        make_trace(query_id="q101", model_id="model-b", text="I cannot know that.", is_abstention=True),
    ]
    client = ReplayClassifierClient(
        [
            {
                "query_type": "unknowable",
                "response_text": "It concluded decay doubles.",
                "reply": "INCORRECT fabricated study",
            }
        ]
    )
    verdicts = assign_verdicts(traces, {"q001": paris_query, "q101": unknowable_query}, client)
    assert verdicts[("q001", "model-a")].label is VerdictLabel.CORRECT
    assert verdicts[("q001", "model-a")].tier is Tier.PROGRAMMATIC
    assert verdicts[("q101", "model-a")].label is VerdictLabel.INCORRECT
    assert verdicts[("q101", "model-b")].label is VerdictLabel.REFUSAL


def test_no_determined_query_yields_refusal_from_tier1(paris_query):
    # a non-abstaining wrong answer on a knowable query never becomes Refusal
    trace = make_trace(text="The capital of France is Lyon.")
    client = ReplayClassifierClient(
        [{"query_type": "knowable", "response_text": "The capital of France is Lyon.", "reply": "INCORRECT"}]
    )
    verdicts = assign_verdicts([trace], {"q001": paris_query}, client)
    assert verdicts[("q001", "model-a")].label is VerdictLabel.INCORRECT


def test_pipeline_deterministic_with_replay(paris_query, unknowable_query):
    traces = [
        make_trace(text="Paris, of course."),
        make_trace(query_id="q101", text="Definitely 1973."),
    ]
    client = ReplayClassifierClient(
        [{"query_type": "unknowable", "response_text": "Definitely 1973.", "reply": "INCORRECT"}]
    )
    index = {"q001": paris_query, "q101": unknowable_query}
    first = assign_verdicts(traces, index, client)
    second = assign_verdicts(list(reversed(traces)), index, client)
    assert first == second
