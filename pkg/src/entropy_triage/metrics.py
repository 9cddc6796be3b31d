"""Rank statistics and the cost-surface report.

AUC uses the midrank (Mann-Whitney) form so ties get exactly half
credit; Spearman is the Pearson correlation of average ranks. Both are
checked against brute-force oracles in the test suite, so keep these
implementations independent of any ROC-integration shortcut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConstantInput, DegenerateClasses, InconsistentCorpus, LengthMismatch
from .judges import JudgeOutcome
from .trace_model import TruthStatus, VerdictLabel


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank block."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores: Sequence[tuple[float, bool]]) -> float:
    """P(score_pos > score_neg) + 0.5 * P(equal), via rank sums."""
    n_pos = sum(1 for _, positive in scores if positive)
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClasses(f"{n_pos} positives, {n_neg} negatives")
    ranks = _average_ranks([s for s, _ in scores])
    rank_sum_pos = float(sum(r for r, (_, positive) in zip(ranks, scores) if positive))
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} values")
    if len(x) < 2:
        raise ConstantInput("need at least 2 points")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise ConstantInput("an input is constant under ranking")
    return float(dx @ dy) / denom


# --- accuracy bookkeeping ------------------------------------------------------


def counted_correct(label: VerdictLabel, truth: TruthStatus) -> bool:
    """Abstention earns credit only on Underdetermined queries."""
    if truth is TruthStatus.DETERMINED:
        return label is VerdictLabel.CORRECT
    return label is VerdictLabel.REFUSAL


def accuracy(outcomes: Sequence[JudgeOutcome], truth_by_query: Mapping[str, TruthStatus]) -> float:
    if not outcomes:
        raise InconsistentCorpus("no outcomes")
    hits = sum(
        1 for o in outcomes if counted_correct(o.final_label, truth_by_query[o.query_id])
    )
    return hits / len(outcomes)


def budget_curve(
    outcomes_by_budget: Mapping[float, Sequence[JudgeOutcome]],
    truth_by_query: Mapping[str, TruthStatus],
) -> list[tuple[float, float]]:
    """(budget, accuracy) points sorted by budget; all budgets must cover the
    same trace set."""
    corpus_ids: set[tuple[str, str]] | None = None
    points = []
    for budget in sorted(outcomes_by_budget):
        outcomes = outcomes_by_budget[budget]
        ids = {(o.query_id, o.model_id) for o in outcomes}
        if corpus_ids is None:
            corpus_ids = ids
        elif ids != corpus_ids:
            raise InconsistentCorpus(f"budget {budget} covers a different trace set")
        points.append((budget, accuracy(outcomes, truth_by_query)))
    return points


@dataclass(frozen=True)
class CostSurface:
    """Accuracy grid over (strategy name, budget fraction)."""

    grid: dict[tuple[str, float], float]
    n_traces: int
    baseline_accuracy: float

    def __post_init__(self):
        for (strategy, _), acc in self.grid.items():
            if strategy == "nojudge" and acc != self.baseline_accuracy:
                raise InconsistentCorpus("nojudge cell deviates from baseline")

    def strategies(self) -> list[str]:
        return sorted({s for s, _ in self.grid})

    def budgets(self) -> list[float]:
        return sorted({b for _, b in self.grid})


COST_SURFACE_HEADER = "strategy,budget,accuracy,n,baseline"


def emit_cost_surface(surface: CostSurface, out_dir: str | Path) -> list[Path]:
    """Write cost_surface.csv plus one budget-curve SVG per strategy.

    Output is deterministic: rows sorted by (strategy, budget), floats at
    4 decimals, hand-assembled SVG.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = out / "cost_surface.csv"
    lines = [COST_SURFACE_HEADER]
    for strategy in surface.strategies():
        for budget in surface.budgets():
            acc = surface.grid[(strategy, budget)]
            lines.append(
                f"{strategy},{budget:.4f},{acc:.4f},{surface.n_traces},{surface.baseline_accuracy:.4f}"
            )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(csv_path)

    for strategy in surface.strategies():
        points = [(b, surface.grid[(strategy, b)]) for b in surface.budgets()]
        svg_path = out / f"curve_{strategy}.svg"
        svg_path.write_text(_curve_svg(strategy, points, surface.baseline_accuracy), encoding="utf-8")
        written.append(svg_path)
    return written


_SVG_W, _SVG_H, _SVG_PAD = 480, 320, 48


def _svg_coords(b: float, acc: float, b_max: float) -> tuple[float, float]:
    x = _SVG_PAD + (b / b_max if b_max else 0.0) * (_SVG_W - 2 * _SVG_PAD)
    y = _SVG_H - _SVG_PAD - acc * (_SVG_H - 2 * _SVG_PAD)
    return x, y


def _curve_svg(strategy: str, points: Sequence[tuple[float, float]], baseline: float) -> str:
    b_max = max((b for b, _ in points), default=1.0) or 1.0
    path = " ".join(
        f"{'M' if i == 0 else 'L'} {x:.2f} {y:.2f}"
        for i, (x, y) in enumerate(_svg_coords(b, a, b_max) for b, a in points)
    )
    _, y_base = _svg_coords(0.0, baseline, b_max)
    markers = "".join(
        f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="#1f6feb"/>'
        f'<text x="{x:.2f}" y="{y - 8:.2f}" font-size="10" text-anchor="middle">{a:.3f}</text>'
        for (x, y), (b, a) in zip((_svg_coords(b, a, b_max) for b, a in points), points)
    )
    ticks = "".join(
        f'<text x="{_svg_coords(b, 0, b_max)[0]:.2f}" y="{_SVG_H - _SVG_PAD + 16}" '
        f'font-size="10" text-anchor="middle">{b:.2f}</text>'
        for b, _ in points
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">'
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>'
        f'<text x="{_SVG_W / 2:.0f}" y="20" font-size="13" text-anchor="middle">'
        f"accuracy vs budget: {strategy}</text>"
        f'<line x1="{_SVG_PAD}" y1="{_SVG_H - _SVG_PAD}" x2="{_SVG_W - _SVG_PAD}" '
        f'y2="{_SVG_H - _SVG_PAD}" stroke="black"/>'
        f'<line x1="{_SVG_PAD}" y1="{_SVG_PAD}" x2="{_SVG_PAD}" y2="{_SVG_H - _SVG_PAD}" stroke="black"/>'
        f'<line x1="{_SVG_PAD}" y1="{y_base:.2f}" x2="{_SVG_W - _SVG_PAD}" y2="{y_base:.2f}" '
        f'stroke="#999" stroke-dasharray="4 3"/>'
        f'<path d="{path}" fill="none" stroke="#1f6feb" stroke-width="2"/>'
        f"{markers}{ticks}"
        f"</svg>\n"
    )
