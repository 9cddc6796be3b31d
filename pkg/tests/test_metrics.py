from __future__ import annotations

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropy_triage.errors import ConstantInput, DegenerateClasses, InconsistentCorpus, LengthMismatch
from entropy_triage.judges import JudgeOutcome
from entropy_triage.metrics import (
    CostSurface,
    accuracy,
    auc,
    budget_curve,
    emit_cost_surface,
    spearman,
)
from entropy_triage.trace_model import TruthStatus, VerdictLabel


# --- independent oracles --------------------------------------------------------


def brute_force_auc(scores):
    """Pairwise concordance: wins + half credit for ties over all pos/neg pairs."""
    pos = [s for s, p in scores if p]
    neg = [s for s, p in scores if not p]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def rank_difference_spearman(x, y):
    """1 - 6 sum(d^2) / (n(n^2-1)); valid only without ties."""
    n = len(x)
    rx = {v: i + 1 for i, v in enumerate(sorted(x))}
    ry = {v: i + 1 for i, v in enumerate(sorted(y))}
    d2 = sum((rx[a] - ry[b]) ** 2 for a, b in zip(x, y))
    return 1 - 6 * d2 / (n * (n * n - 1))


# --- auc -------------------------------------------------------------------------


def test_auc_perfect_separation():
    scores = [(1.0, True)] * 3 + [(0.0, False)] * 4
    assert auc(scores) == 1.0


def test_auc_all_ties_is_half():
    scores = [(0.7, True)] * 3 + [(0.7, False)] * 5
    assert auc(scores) == 0.5


def test_auc_hand_case():
    # pairs: (.9>.8) (.9>.1) (.4<.8) (.4>.1) -> 3 of 4
    scores = [(0.9, True), (0.4, True), (0.8, False), (0.1, False)]
    assert auc(scores) == 0.75


def test_auc_degenerate_classes():
    with pytest.raises(DegenerateClasses):
        auc([(0.5, True), (0.7, True)])


def test_auc_matches_brute_force_with_ties():
    rng = random.Random(3)
    for _ in range(100):
        n = rng.randint(2, 60)
        scores = [
            (rng.choice([0.0, 0.25, 0.5, 0.75, 1.0, rng.random()]), rng.random() < 0.5)
            for _ in range(n)
        ]
        if not any(p for _, p in scores) or all(p for _, p in scores):
            continue
        assert auc(scores) == pytest.approx(brute_force_auc(scores), abs=1e-12)


@given(
    st.lists(
        st.tuples(st.floats(min_value=0, max_value=1, width=32), st.booleans()),
        min_size=2,
        max_size=80,
    )
)
@settings(max_examples=150)
def test_auc_negation_symmetry(scores):
    n_pos = sum(1 for _, p in scores if p)
    if n_pos in (0, len(scores)):
        return
    values = [s for s, _ in scores]
    if len(set(values)) != len(values):
        return  # symmetry as stated holds for tie-free inputs
    negated = [(-s, p) for s, p in scores]
    assert auc(negated) == pytest.approx(1.0 - auc(scores), abs=1e-12)


# --- spearman ---------------------------------------------------------------------


def test_spearman_identity_and_reversal():
    x = [3.0, 1.0, 4.0, 1.5, 9.0]
    assert spearman(x, x) == pytest.approx(1.0)
    assert spearman(x, [-v for v in x]) == pytest.approx(-1.0)


def test_spearman_hand_case():
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)


def test_spearman_errors():
    with pytest.raises(LengthMismatch):
        spearman([1, 2], [1, 2, 3])
    with pytest.raises(ConstantInput):
        spearman([1.0, 1.0, 1.0], [1, 2, 3])
    with pytest.raises(ConstantInput):
        spearman([1.0], [2.0])


def test_spearman_matches_rank_difference_oracle():
    rng = random.Random(5)
    for _ in range(100):
        n = rng.randint(2, 50)
        x = rng.sample(range(10000), n)
        y = rng.sample(range(10000), n)
        assert spearman(x, y) == pytest.approx(rank_difference_spearman(x, y), abs=1e-12)


@given(st.integers(min_value=2, max_value=40), st.randoms())
@settings(max_examples=80)
def test_spearman_invariant_under_monotone_transform(n, rnd):
    x = rnd.sample(range(100000), n)
    y = rnd.sample(range(100000), n)
    base = spearman(x, y)
    assert spearman([math.exp(v / 50000) for v in x], y) == pytest.approx(base, abs=1e-9)
    assert spearman(x, [v**3 for v in y]) == pytest.approx(base, abs=1e-9)


# --- budget curve -----------------------------------------------------------------


def _outcome(qid, label, selected=False, intervened=False):
    return JudgeOutcome(qid, "m", selected or intervened, intervened, label, 0.0)


TRUTH = {
    "k1": TruthStatus.DETERMINED,
    "k2": TruthStatus.DETERMINED,
    "k3": TruthStatus.DETERMINED,
    "k4": TruthStatus.DETERMINED,
    "u1": TruthStatus.UNDERDETERMINED,
    "u2": TruthStatus.UNDERDETERMINED,
    "u3": TruthStatus.UNDERDETERMINED,
    "u4": TruthStatus.UNDERDETERMINED,
}


def test_budget_curve_baseline_point():
    # 6 of 8 counted correct: 3 correct knowable + 3 refused unknowable
    outcomes = [
        _outcome("k1", VerdictLabel.CORRECT),
        _outcome("k2", VerdictLabel.CORRECT),
        _outcome("k3", VerdictLabel.CORRECT),
        _outcome("k4", VerdictLabel.INCORRECT),
        _outcome("u1", VerdictLabel.REFUSAL),
        _outcome("u2", VerdictLabel.REFUSAL),
        _outcome("u3", VerdictLabel.REFUSAL),
        _outcome("u4", VerdictLabel.INCORRECT),
    ]
    assert budget_curve({0.0: outcomes}, TRUTH) == [(0.0, 0.75)]


def test_budget_curve_full_budget_hand_simulation():
    # at budget 1.0 the fabrication on u4 is intervened; k4 stays wrong:
    # counted correct = 3 knowable + 4 unknowable = 7/8
    baseline = [
        _outcome("k1", VerdictLabel.CORRECT),
        _outcome("k2", VerdictLabel.CORRECT),
        _outcome("k3", VerdictLabel.CORRECT),
        _outcome("k4", VerdictLabel.INCORRECT),
        _outcome("u1", VerdictLabel.REFUSAL),
        _outcome("u2", VerdictLabel.REFUSAL),
        _outcome("u3", VerdictLabel.REFUSAL),
        _outcome("u4", VerdictLabel.INCORRECT),
    ]
    full = [
        _outcome("k1", VerdictLabel.CORRECT, selected=True),
        _outcome("k2", VerdictLabel.CORRECT, selected=True),
        _outcome("k3", VerdictLabel.CORRECT, selected=True),
        _outcome("k4", VerdictLabel.INCORRECT, selected=True),
        _outcome("u1", VerdictLabel.REFUSAL, selected=True),
        _outcome("u2", VerdictLabel.REFUSAL, selected=True),
        _outcome("u3", VerdictLabel.REFUSAL, selected=True),
        _outcome("u4", VerdictLabel.REFUSAL, intervened=True),
    ]
    curve = budget_curve({0.0: baseline, 1.0: full}, TRUTH)
    assert curve == [(0.0, 0.75), (1.0, 0.875)]


def test_budget_curve_rejects_inconsistent_corpus():
    with pytest.raises(InconsistentCorpus):
        budget_curve(
            {
                0.0: [_outcome("k1", VerdictLabel.CORRECT)],
                0.5: [_outcome("k2", VerdictLabel.CORRECT)],
            },
            TRUTH,
        )


def test_budget_curve_permutation_invariant():
    outcomes = [
        _outcome("k1", VerdictLabel.CORRECT),
        _outcome("u1", VerdictLabel.INCORRECT),
        _outcome("k4", VerdictLabel.INCORRECT),
    ]
    for perm in itertools.permutations(outcomes):
        assert budget_curve({0.1: list(perm)}, TRUTH) == budget_curve({0.1: outcomes}, TRUTH)


# --- cost surface -----------------------------------------------------------------


def _surface():
    grid = {}
    for strategy, accs in {
        "nojudge": (0.758, 0.758, 0.758),
        "text": (0.792, 0.828, 0.876),
        "tensor": (0.817, 0.867, 0.902),
        "composed": (0.811, 0.877, 0.918),
    }.items():
        for budget, acc in zip((0.1, 0.2, 0.3), accs):
            grid[(strategy, budget)] = acc
    return CostSurface(grid, n_traces=800, baseline_accuracy=0.758)


def test_cost_surface_csv_shape(tmp_path):
    paths = emit_cost_surface(_surface(), tmp_path)
    csv_path = [p for p in paths if p.suffix == ".csv"][0]
    lines = csv_path.read_text().strip().split("\n")
    assert len(lines) == 13  # header + 4 strategies x 3 budgets
    assert lines[0] == "strategy,budget,accuracy,n,baseline"
    nojudge_rows = [l for l in lines if l.startswith("nojudge")]
    assert all(row.split(",")[2] == "0.7580" for row in nojudge_rows)
    at_10 = {l.split(",")[0]: l.split(",")[2] for l in lines[1:] if l.split(",")[1] == "0.1000"}
    assert at_10 == {"nojudge": "0.7580", "text": "0.7920", "tensor": "0.8170", "composed": "0.8110"}


def test_cost_surface_rejects_nojudge_deviation():
    with pytest.raises(InconsistentCorpus):
        CostSurface({("nojudge", 0.1): 0.9}, n_traces=10, baseline_accuracy=0.5)


def test_svg_emission_deterministic(tmp_path):
    a = emit_cost_surface(_surface(), tmp_path / "a")
    b = emit_cost_surface(_surface(), tmp_path / "b")
    for pa, pb in zip(sorted(a), sorted(b)):
        assert pa.read_bytes() == pb.read_bytes()
    svgs = [p for p in a if p.suffix == ".svg"]
    assert len(svgs) == 4
    assert all(p.read_text().startswith("<svg") for p in svgs)
