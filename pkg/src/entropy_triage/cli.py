"""Command-line pipeline: ingest -> signals -> verdicts -> judges -> reports.

Exit codes: 0 success, 1 simulation property mismatch, 2 validation
error, 3 classifier/lookup client failure. Report files from a failed
run are removed so an output directory never holds a partial result.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import formal_sim, metrics, tda
from .errors import (
    CitationIndexUnavailable,
    ClientUnavailable,
    ConstantInput,
    TriageError,
    UnparseableClassifierOutput,
)
from .evaluator import (
    ClassifierClient,
    ClassifierRequest,
    HttpClassifierClient,
    ReplayClassifierClient,
    assign_verdicts,
    load_negation_terms,
)
from .judges import (
    CitationVerifyingOracle,
    CorpusOracle,
    EntropyScore,
    FileCitationIndex,
    JudgeStrategy,
    StrategyKind,
    apply_budget,
    baseline_outcomes,
    rank_for_verification,
)
from .signals import (
    CorpusStats,
    PatternList,
    SignalVector,
    aggregate_signals,
    default_hedge_patterns,
    default_refusal_patterns,
)
from .trace_model import TruthStatus, join_traces, load_queries, load_traces

logger = logging.getLogger("entropy_triage")

EXIT_OK = 0
EXIT_PROPERTY_MISMATCH = 1
EXIT_VALIDATION = 2
EXIT_CLIENT = 3

_CLIENT_ERRORS = (ClientUnavailable, UnparseableClassifierOutput, CitationIndexUnavailable)

AUC_SIGNALS = ("mean_entropy", "max_entropy", "entropy_std", "spike_count", "response_length")


@dataclass(frozen=True)
class RunConfig:
    queries_path: Path
    traces_path: Path
    output_dir: Path
    strategies: tuple[StrategyKind, ...]
    budgets: tuple[float, ...]
    entropy_score: EntropyScore
    classifier: str | None
    seed: int
    validate_only: bool
    hedge_patterns: Path | None = None
    refusal_patterns: Path | None = None
    negation_terms: Path | None = None
    citation_index: Path | None = None

    def validate(self) -> None:
        if not self.strategies:
            raise TriageError("no strategies configured")
        if not self.budgets:
            raise TriageError("no budgets configured")
        if any(not 0.0 <= b <= 1.0 for b in self.budgets):
            raise TriageError("budgets must lie in [0, 1]")
        if list(self.budgets) != sorted(self.budgets):
            raise TriageError("budgets must be sorted ascending")
        # a validate-only invocation checks inputs, not judge wiring
        if not self.validate_only and StrategyKind.COMPOSED in self.strategies and self.citation_index is None:
            raise TriageError("the composed strategy needs --citation-index")


def _parse_strategies(raw: str) -> tuple[StrategyKind, ...]:
    out = []
    for name in raw.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            out.append(StrategyKind(name))
        except ValueError:
            raise TriageError(f"unknown strategy {name!r}") from None
    return tuple(out)


def _parse_budgets(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(b) for b in raw.split(",") if b.strip())
    except ValueError:
        raise TriageError(f"bad budget list {raw!r}") from None


def _make_classifier(spec: str | None) -> ClassifierClient:
    if spec is None:
        return _NoClassifier()
    mode, _, arg = spec.partition(":")
    if mode == "replay" and arg:
        return ReplayClassifierClient.from_file(arg)
    if mode == "live" and arg:
        return HttpClassifierClient(arg)
    raise TriageError(f"bad --classifier value {spec!r}; use replay:<path> or live:<url>")


class _NoClassifier:
    def classify(self, request: ClassifierRequest) -> str:
        raise ClientUnavailable("no classifier configured but a trace escalated to tier 2")


class _ReportWriter:
    """Tracks written report files so a failed run leaves nothing behind."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def write_text(self, name: str, content: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_text(content, encoding="utf-8")
        self.written.append(path)
        return path

    def track(self, paths: Sequence[Path]) -> None:
        self.written.extend(paths)

    def cleanup(self) -> None:
        for path in self.written:
            try:
                path.unlink()
            except OSError:
                pass


def _fmt(x: float) -> str:
    return format(x, ".6f")


def cmd_run(config: RunConfig) -> int:
    config.validate()

    queries = load_queries(config.queries_path)
    traces = load_traces(config.traces_path)
    query_index = join_traces(queries, traces, strict=True)
    logger.info("loaded %d queries, %d traces", len(queries), len(traces))
    if config.validate_only:
        # Exercise per-trace signal extraction too; still no outputs.
        stats = CorpusStats.from_traces(traces)
        for t in traces:
            aggregate_signals(t, stats)
        return EXIT_OK

    hedge = PatternList.from_file(config.hedge_patterns) if config.hedge_patterns else default_hedge_patterns()
    refusal = PatternList.from_file(config.refusal_patterns) if config.refusal_patterns else default_refusal_patterns()
    negation = load_negation_terms(config.negation_terms) if config.negation_terms else None

    stats = CorpusStats.from_traces(traces)
    keys = sorted((t.query_id, t.model_id) for t in traces)
    by_key = {(t.query_id, t.model_id): t for t in traces}
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        signal_list = list(
            pool.map(lambda k: aggregate_signals(by_key[k], stats, hedge_patterns=hedge, refusal_patterns=refusal), keys)
        )
    signals: dict[tuple[str, str], SignalVector] = dict(zip(keys, signal_list))

    classifier = _make_classifier(config.classifier)
    verdicts = assign_verdicts(
        traces, query_index, classifier, refusal_patterns=refusal, negation_terms=negation
    )
    truth = {q.query_id: q.truth_status for q in queries}
    categories = {q.query_id: q.category for q in queries}
    texts = {k: by_key[k].text for k in keys}
    oracle = CorpusOracle(verdicts, truth)

    writer = _ReportWriter(config.output_dir)
    try:
        _write_signals_csv(writer, signals)
        _write_verdicts_csv(writer, verdicts)

        grid: dict[tuple[str, float], float] = {}
        baseline = metrics.accuracy(baseline_outcomes(oracle), truth)
        for kind in config.strategies:
            strategy_oracle = oracle
            if kind is StrategyKind.COMPOSED:
                index = FileCitationIndex.from_file(config.citation_index)
                strategy_oracle = CitationVerifyingOracle(oracle, index, categories, texts)
            outcomes_by_budget = {}
            for budget in config.budgets:
                if kind is StrategyKind.NO_JUDGE:
                    outcomes = baseline_outcomes(oracle)
                else:
                    strategy = JudgeStrategy(
                        kind,
                        budget_fraction=budget,
                        entropy_score=config.entropy_score,
                        citation_router=kind is StrategyKind.COMPOSED,
                    )
                    ranking = rank_for_verification(
                        signals,
                        strategy,
                        categories=categories if kind is StrategyKind.COMPOSED else None,
                    )
                    outcomes = apply_budget(ranking, budget, strategy_oracle)
                outcomes_by_budget[budget] = outcomes
            for budget, acc in metrics.budget_curve(outcomes_by_budget, truth):
                grid[(kind.value, budget)] = acc

        surface = metrics.CostSurface(grid, n_traces=len(traces), baseline_accuracy=baseline)
        writer.track(metrics.emit_cost_surface(surface, config.output_dir))
        _write_auc_report(writer, signals, truth)
        _write_spearman_matrix(writer, signals)
    except Exception:
        writer.cleanup()
        raise
    logger.info("reports written to %s", config.output_dir)
    return EXIT_OK


def _write_signals_csv(writer: _ReportWriter, signals: Mapping[tuple[str, str], SignalVector]) -> None:
    lines = [
        "query_id,model_id,mean_entropy,max_entropy,entropy_std,spike_count,"
        "response_length,hedge_flag,refusal_flag,topk_entropy_lb_mean,degenerate"
    ]
    for (qid, mid), sv in sorted(signals.items()):
        topk = _fmt(sv.topk_entropy_lb_mean) if sv.topk_entropy_lb_mean is not None else ""
        lines.append(
            f"{qid},{mid},{_fmt(sv.mean_entropy)},{_fmt(sv.max_entropy)},{_fmt(sv.entropy_std)},"
            f"{sv.spike_count},{sv.response_length},{int(sv.hedge_flag)},{int(sv.refusal_flag)},"
            f"{topk},{int(sv.degenerate)}"
        )
    writer.write_text("signals.csv", "\n".join(lines) + "\n")


def _write_verdicts_csv(writer: _ReportWriter, verdicts) -> None:
    lines = ["query_id,model_id,label,tier,rationale"]
    for (qid, mid), v in sorted(verdicts.items()):
        rationale = v.rationale.replace('"', "'").replace("\n", " ")
        lines.append(f'{qid},{mid},{v.label.value},{v.tier.value},"{rationale}"')
    writer.write_text("verdicts.csv", "\n".join(lines) + "\n")


def _write_auc_report(writer: _ReportWriter, signals, truth) -> None:
    """Per-signal AUC of knowable-vs-unknowable discrimination, per model
    and pooled; positives are Underdetermined queries."""
    lines = ["model_id,signal,auc,n_pos,n_neg"]
    models = sorted({mid for _, mid in signals}) + ["pooled"]
    for model in models:
        rows = [
            (sv, truth[qid] is TruthStatus.UNDERDETERMINED)
            for (qid, mid), sv in sorted(signals.items())
            if model == "pooled" or mid == model
        ]
        n_pos = sum(1 for _, positive in rows if positive)
        n_neg = len(rows) - n_pos
        for name in AUC_SIGNALS:
            if n_pos == 0 or n_neg == 0:
                continue
            value = metrics.auc([(float(getattr(sv, name)), positive) for sv, positive in rows])
            lines.append(f"{model},{name},{_fmt(value)},{n_pos},{n_neg}")
    writer.write_text("auc_report.csv", "\n".join(lines) + "\n")


def _write_spearman_matrix(writer: _ReportWriter, signals) -> None:
    """Cross-model agreement of mean entropy over shared queries."""
    by_model: dict[str, dict[str, float]] = {}
    for (qid, mid), sv in signals.items():
        by_model.setdefault(mid, {})[qid] = sv.mean_entropy
    models = sorted(by_model)
    lines = ["model_a,model_b,spearman,n_queries"]
    for i, a in enumerate(models):
        for b in models[i + 1 :]:
            shared = sorted(set(by_model[a]) & set(by_model[b]))
            if len(shared) < 2:
                continue
            try:
                rho = metrics.spearman(
                    [by_model[a][q] for q in shared], [by_model[b][q] for q in shared]
                )
            except ConstantInput:
                continue
            lines.append(f"{a},{b},{_fmt(rho)},{len(shared)}")
    writer.write_text("spearman_matrix.csv", "\n".join(lines) + "\n")


def cmd_simulate(scenario_path: str | None, report_path: str | None) -> int:
    scenario = formal_sim.load_scenario(scenario_path)
    report = formal_sim.run_scenario(scenario)
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        marker = "" if result.matches_expectation else "  [MISMATCH vs expectation]"
        print(f"{status}: {result.name} - {result.detail}{marker}")
    if report_path:
        Path(report_path).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK if report.all_matched else EXIT_PROPERTY_MISMATCH


def cmd_tda(traces_path: str, out_path: str) -> int:
    traces = load_traces(traces_path)
    lines = ["query_id,model_id,fragmentation,coherence"]
    for trace in sorted(traces, key=lambda t: (t.query_id, t.model_id)):
        if trace.attention_summary is None:
            continue
        cloud = tda.PointCloud.from_attention(trace.attention_summary)
        diagram = tda.rips_persistence(cloud, max_dim=1)
        lines.append(
            f"{trace.query_id},{trace.model_id},{_fmt(tda.fragmentation(diagram))},{_fmt(tda.coherence(diagram))}"
        )
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etriage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline over a queries CSV and trace JSONL")
    run.add_argument("--queries", required=True)
    run.add_argument("--traces", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--budgets", default="0.1,0.2,0.3")
    run.add_argument("--strategies", default="nojudge,text,tensor,composed")
    run.add_argument("--entropy-score", choices=["mean", "max"], default="mean")
    run.add_argument("--classifier", default=None, help="replay:<path> or live:<url>")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--validate-only", action="store_true")
    run.add_argument("--hedge-patterns", default=None)
    run.add_argument("--refusal-patterns", default=None)
    run.add_argument("--negation-terms", default=None)
    run.add_argument("--citation-index", default=None)

    sim = sub.add_parser("simulate", help="run the observation-model property checks")
    sim.add_argument("--scenario", default=None)
    sim.add_argument("--report", default=None, help="also write the JSON properties report here")

    tda_cmd = sub.add_parser("tda", help="fragmentation/coherence per trace with attention data")
    tda_cmd.add_argument("--traces", required=True)
    tda_cmd.add_argument("--out", required=True)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("ET_LOG", "").lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = RunConfig(
                queries_path=Path(args.queries),
                traces_path=Path(args.traces),
                output_dir=Path(args.out),
                strategies=_parse_strategies(args.strategies),
                budgets=_parse_budgets(args.budgets),
                entropy_score=EntropyScore(args.entropy_score),
                classifier=args.classifier,
                seed=args.seed,
                validate_only=args.validate_only,
                hedge_patterns=Path(args.hedge_patterns) if args.hedge_patterns else None,
                refusal_patterns=Path(args.refusal_patterns) if args.refusal_patterns else None,
                negation_terms=Path(args.negation_terms) if args.negation_terms else None,
                citation_index=Path(args.citation_index) if args.citation_index else None,
            )
            return cmd_run(config)
        if args.command == "simulate":
            return cmd_simulate(args.scenario, args.report)
        if args.command == "tda":
            return cmd_tda(args.traces, args.out)
        raise AssertionError(args.command)
    except _CLIENT_ERRORS as exc:
        print(f"client error: {exc}", file=sys.stderr)
        return EXIT_CLIENT
    except TriageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
