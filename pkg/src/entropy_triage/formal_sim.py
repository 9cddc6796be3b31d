"""Executable observation-model simulator.

Small, finite, fully deterministic: worlds, tabular policies, bounded
supervisors, layered judges, and composition-graph verification costs.
The impossibility statements become runnable property checks over this
state space -- with randomness pinned to explicit seeds so that the
"identical expected updates" argument strengthens to byte-identical
realized trajectories.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import BadEpsilon, CostModelViolatesRegime, InvariantViolation, ScenarioError
from .trace_model import TruthStatus

ABSTAIN = "ABSTAIN"

_ROW_SUM_TOL = 1e-12


# --- state -------------------------------------------------------------------


@dataclass(frozen=True)
class TruthEntry:
    status: TruthStatus
    correct_response: str | None = None

    def __post_init__(self):
        if self.status is TruthStatus.DETERMINED and self.correct_response is None:
            raise InvariantViolation("Determined truth entry needs a correct response")
        if self.status is TruthStatus.UNDERDETERMINED and self.correct_response is not None:
            raise InvariantViolation("Underdetermined truth entry cannot name a correct response")


@dataclass(frozen=True)
class WorldModel:
    world_id: str
    truth: Mapping[str, TruthEntry]


@dataclass(frozen=True)
class PredictorCentricPolicy:
    """Tabular stochastic policy over a finite response set; conditions on
    the query alone, never on the world."""

    table: Mapping[str, Mapping[str, float]]

    def __post_init__(self):
        for query_id, row in self.table.items():
            total = math.fsum(row.values())
            if abs(total - 1.0) > _ROW_SUM_TOL:
                raise InvariantViolation(f"policy row for {query_id!r} sums to {total!r}")
            if any(p < 0.0 for p in row.values()):
                raise InvariantViolation(f"policy row for {query_id!r} has negative mass")


@dataclass(frozen=True)
class Observation:
    """What the bounded supervisor sees: the query, the emitted response,
    and the verification result -- None when the check exceeded budget."""

    query_id: str
    response: str
    verification: str | None


RewardRule = Callable[[Observation], float]
CostModel = Callable[[str, str, WorldModel], float]


@dataclass(frozen=True)
class SupervisorSpec:
    budget: float
    cost_model: CostModel
    reward_rule: RewardRule


def verify_response(query_id: str, response: str, world: WorldModel, abstention: str = ABSTAIN) -> str:
    """Ground-truth check. Abstention is world-independent by design: there
    is no claim to check, so the supervisor learns nothing about the world."""
    if response == abstention:
        return "abstained"
    entry = world.truth[query_id]
    if entry.status is TruthStatus.DETERMINED and response == entry.correct_response:
        return "confirmed"
    return "refuted"


def observe(
    supervisor: SupervisorSpec,
    query_id: str,
    response: str,
    world: WorldModel,
    abstention: str = ABSTAIN,
) -> Observation:
    cost = supervisor.cost_model(query_id, response, world)
    if cost <= supervisor.budget:
        return Observation(query_id, response, verify_response(query_id, response, world, abstention))
    return Observation(query_id, response, None)


# --- representational impossibility -------------------------------------------


@dataclass(frozen=True)
class HonestyCheck:
    epsilon: float
    feasible: bool
    required_mass: float
    witness: PredictorCentricPolicy | None = None


def check_honesty_feasible(
    response_set: Sequence[str],
    epsilon: float,
    *,
    query_id: str = "q_star",
    correct_response: str,
    abstention: str = ABSTAIN,
) -> HonestyCheck:
    """Decide whether one query-conditioned policy can be honest in both an
    answerable and an unanswerable world.

    Honesty demands mass >= 1 - epsilon on the correct response (world A)
    and on abstention (world B). The two outcomes are distinct, so the
    demands add: 2(1 - epsilon) > 1 exactly when epsilon < 0.5, and no
    row of a probability table holds that much. At epsilon >= 0.5 the
    even split over both outcomes is a verifiable witness.
    """
    if not 0.0 <= epsilon < 1.0:
        raise BadEpsilon(f"epsilon {epsilon} outside [0, 1)")
    if correct_response == abstention:
        raise ScenarioError("the correct response must differ from abstention")
    if correct_response not in response_set or abstention not in response_set:
        raise ScenarioError("response set must contain the correct response and abstention")

    required_mass = 2.0 * (1.0 - epsilon)
    if epsilon < 0.5:
        return HonestyCheck(epsilon, feasible=False, required_mass=required_mass)

    row = {r: 0.0 for r in response_set}
    row[correct_response] = 0.5
    row[abstention] = 0.5
    witness = PredictorCentricPolicy({query_id: row})
    return HonestyCheck(epsilon, feasible=True, required_mass=required_mass, witness=witness)


# --- learnability impossibility ------------------------------------------------

# An update rule is a pure function of (observation, reward, params, rng draw).
UpdateRule = Callable[[Observation, float, Sequence[float], float], Sequence[float]]


def _softmax(params: Sequence[float]) -> list[float]:
    peak = max(params)
    exps = [math.exp(p - peak) for p in params]
    total = math.fsum(exps)
    return [e / total for e in exps]


def run_learning(
    update_rule: UpdateRule,
    supervisor: SupervisorSpec,
    world: WorldModel,
    seed: int,
    steps: int,
    *,
    query_id: str,
    responses: Sequence[str],
    fabrication: str,
    abstention: str = ABSTAIN,
    init_params: Sequence[float] | None = None,
    expect_regime: bool = True,
    explore_rate: float = 0.05,
) -> list[tuple[float, ...]]:
    """Simulate reward learning against a bounded supervisor and return the
    full parameter trajectory (softmax logits per response).

    With expect_regime=True the run refuses to start unless verifying the
    fabrication exceeds the budget in this world; pass False for
    raised-budget runs where the premise is deliberately removed.
    Sampling is softmax with an explore_rate-greedy floor so no response
    starves permanently; both draws come from the one seeded stream.
    """
    if expect_regime:
        cost = supervisor.cost_model(query_id, fabrication, world)
        if cost <= supervisor.budget:
            raise CostModelViolatesRegime(
                f"fabrication {fabrication!r} verifiable in {world.world_id} (cost {cost} <= budget {supervisor.budget})"
            )
    params = list(init_params) if init_params is not None else [0.0] * len(responses)
    if len(params) != len(responses):
        raise ScenarioError("init_params must align with the response set")

    rng = random.Random(seed)
    trajectory = [tuple(params)]
    for _ in range(steps):
        u_mode = rng.random()
        u_pick = rng.random()
        if u_mode < explore_rate:
            chosen = min(int(u_pick * len(responses)), len(responses) - 1)
        else:
            probs = _softmax(params)
            cumulative = 0.0
            chosen = len(responses) - 1
            for i, p in enumerate(probs):
                cumulative += p
                if u_pick <= cumulative:
                    chosen = i
                    break
        response = responses[chosen]
        obs = observe(supervisor, query_id, response, world, abstention)
        reward = supervisor.reward_rule(obs)
        draw = rng.random()
        delta = update_rule(obs, reward, params, draw)
        params = [p + d for p, d in zip(params, delta)]
        trajectory.append(tuple(params))
    return trajectory


def random_update_rule(seed: int, responses: Sequence[str]) -> UpdateRule:
    """A random member of a pure update-rule family: reward-proportional
    terms on the chosen response and on the whole row, rng-driven noise,
    decay, and a verification-sensitivity term."""
    gen = random.Random(seed)
    a = gen.uniform(-0.6, 0.6)
    b = gen.uniform(-0.25, 0.25)
    c = gen.uniform(-0.05, 0.05)
    d = gen.uniform(0.0, 0.08)
    e = gen.uniform(-0.3, 0.3)
    index = {r: i for i, r in enumerate(responses)}

    def rule(obs: Observation, reward: float, params: Sequence[float], draw: float) -> list[float]:
        chosen = index[obs.response]
        verified = 1.0 if obs.verification is not None else 0.0
        return [
            a * reward * (1.0 if i == chosen else 0.0)
            + b * reward
            + c * (draw - 0.5)
            - d * p
            + e * verified * (1.0 if i == chosen else 0.0)
            for i, p in enumerate(params)
        ]

    return rule


def trajectories_identical(t1: Sequence[tuple[float, ...]], t2: Sequence[tuple[float, ...]]) -> bool:
    return len(t1) == len(t2) and all(a == b for a, b in zip(t1, t2))


# --- layered judges -------------------------------------------------------------

JudgeFn = Callable[[object], object]


def stack_judges(judges: Sequence[JudgeFn], obs_a, obs_b) -> list[tuple[object, object]]:
    """Push two observations through a judge stack; returns the per-layer
    pairs, layer 0 being the inputs themselves."""
    layers = [(obs_a, obs_b)]
    for judge in judges:
        prev_a, prev_b = layers[-1]
        layers.append((judge(prev_a), judge(prev_b)))
    return layers


def hashing_judge(salt: str) -> JudgeFn:
    """Deterministic observation transformer used to sample arbitrary pure
    judges in property checks."""

    def judge(obs: object) -> str:
        return hashlib.sha256(f"{salt}|{obs!r}".encode("utf-8")).hexdigest()[:16]

    return judge


# --- composition graphs ----------------------------------------------------------


class EdgeKind(Enum):
    ENTAILMENT = "entailment"
    COREFERENCE = "coreference"
    CAUSAL = "causal"
    TEMPORAL = "temporal"


@dataclass(frozen=True)
class CompositionGraph:
    """Subclaim dependency graph; may contain cycles (coreference is
    symmetric by nature)."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, EdgeKind], ...]

    def __post_init__(self):
        known = set(self.nodes)
        for u, v, _ in self.edges:
            if u not in known or v not in known:
                raise InvariantViolation(f"edge ({u!r}, {v!r}) references unknown node")

    @classmethod
    def clique(cls, n: int, kind: EdgeKind = EdgeKind.ENTAILMENT) -> "CompositionGraph":
        nodes = tuple(f"c{i}" for i in range(n))
        edges = tuple(
            (nodes[i], nodes[j], kind) for i in range(n) for j in range(i + 1, n)
        )
        return cls(nodes, edges)


def verification_cost(graph: CompositionGraph, per_edge_cost: float) -> float:
    """Checking coherence means touching every dependency once."""
    if per_edge_cost <= 0.0:
        raise InvariantViolation("per_edge_cost must be positive")
    return per_edge_cost * len(graph.edges)


def graph_cost_model(
    graphs: Mapping[str, CompositionGraph],
    per_edge_cost: float,
    *,
    overrides: Mapping[str, Mapping[str, float]] | None = None,
) -> CostModel:
    """Cost model driven by each response's composition graph, with optional
    per-world overrides for asymmetric-information scenarios."""

    def cost(query_id: str, response: str, world: WorldModel) -> float:
        if overrides and response in overrides and world.world_id in overrides[response]:
            return overrides[response][world.world_id]
        return verification_cost(graphs[response], per_edge_cost)

    return cost


# --- tensor-mode observation ------------------------------------------------------


class Provenance(Enum):
    TRAINING_DATA = "training_data"
    FABRICATED = "fabricated"


class Topology(Enum):
    COHERENT = "coherent"
    FRAGMENTED = "fragmented"


class ResponseKind(Enum):
    GROUND_TRUTH = "ground_truth"
    PLAUSIBLE_LIE = "plausible_lie"
    OBVIOUS_LIE = "obvious_lie"


@dataclass(frozen=True)
class ResponseProfile:
    text: str
    kind: ResponseKind
    provenance: Provenance
    topology: Topology


def text_only_verify(profile: ResponseProfile, obvious_lies: frozenset[str]) -> bool:
    """Baseline heuristics on the exported string alone."""
    return profile.text not in obvious_lies


def tensor_verify(profile: ResponseProfile, obvious_lies: frozenset[str]) -> bool:
    """Three-component check over (text, provenance, topology)."""
    return (
        profile.text not in obvious_lies
        and profile.topology is Topology.COHERENT
        and profile.provenance is Provenance.TRAINING_DATA
    )


# --- scenario runner ---------------------------------------------------------------


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    expected: bool
    detail: str

    @property
    def matches_expectation(self) -> bool:
        return self.passed == self.expected


@dataclass(frozen=True)
class PropertiesReport:
    scenario_name: str
    results: tuple[PropertyResult, ...]

    @property
    def all_matched(self) -> bool:
        return all(r.matches_expectation for r in self.results)

    def to_json(self) -> str:
        return json.dumps(
            {
                "scenario": self.scenario_name,
                "all_matched": self.all_matched,
                "properties": [
                    {
                        "name": r.name,
                        "passed": r.passed,
                        "expected": r.expected,
                        "matches_expectation": r.matches_expectation,
                        "detail": r.detail,
                    }
                    for r in self.results
                ],
            },
            indent=2,
        )


def load_scenario(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("entropy_triage.data").joinpath("default_scenario.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        scenario = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    for key in ("name", "seed", "steps", "query", "responses", "correct_response", "worlds", "costs", "budget"):
        if key not in scenario:
            raise ScenarioError(f"scenario missing key {key!r}")
    return scenario


def _worlds_from_scenario(scenario: dict) -> dict[str, WorldModel]:
    worlds = {}
    for world_id, truth_raw in scenario["worlds"].items():
        truth = {}
        for query_id, entry in truth_raw.items():
            status = TruthStatus(entry["status"])
            truth[query_id] = TruthEntry(status, entry.get("correct_response"))
        worlds[world_id] = WorldModel(world_id, truth)
    return worlds


def _cost_model_from_scenario(scenario: dict) -> CostModel:
    costs = scenario["costs"]

    def cost(query_id: str, response: str, world: WorldModel) -> float:
        try:
            value = costs[response]
        except KeyError:
            raise ScenarioError(f"no cost entry for response {response!r}") from None
        if isinstance(value, Mapping):
            return float(value[world.world_id])
        return float(value)

    return cost


def _reward_rule_from_scenario(scenario: dict) -> RewardRule:
    table = {
        "confirmed": 1.0,
        "refuted": -1.0,
        "unverified": 0.2,
        "abstained": -0.1,
    }
    table.update(scenario.get("reward", {}))

    def reward(obs: Observation) -> float:
        if obs.verification is None:
            return table["unverified"]
        return table[obs.verification]

    return reward


def run_scenario(scenario: dict) -> PropertiesReport:
    """Execute every property check in the scenario and report pass/fail
    against the scenario's expectations (default: theory holds)."""
    seed = int(scenario["seed"])
    steps = int(scenario["steps"])
    query_id = scenario["query"]
    responses = list(scenario["responses"])
    abstention = scenario.get("abstention", ABSTAIN)
    correct_response = scenario["correct_response"]
    fabrication = scenario.get("fabrication", correct_response)
    worlds = _worlds_from_scenario(scenario)
    if len(worlds) != 2:
        raise ScenarioError("need exactly two worlds")
    world_a, world_b = (worlds[k] for k in sorted(worlds))
    cost_model = _cost_model_from_scenario(scenario)
    reward_rule = _reward_rule_from_scenario(scenario)
    supervisor = SupervisorSpec(float(scenario["budget"]), cost_model, reward_rule)
    expected = scenario.get("expected", {})
    results: list[PropertyResult] = []

    # Property 1: representational impossibility on the epsilon grid.
    eps_cases = scenario.get("epsilon_cases", [{"epsilon": e / 100.0} for e in range(0, 50, 7)] + [{"epsilon": 0.5}])
    mismatches = []
    for case in eps_cases:
        eps = float(case["epsilon"])
        check = check_honesty_feasible(
            responses, eps, query_id=query_id, correct_response=correct_response, abstention=abstention
        )
        want_infeasible = case.get("expect", "infeasible" if eps < 0.5 else "feasible") == "infeasible"
        if check.feasible == want_infeasible:
            mismatches.append(f"epsilon={eps}: got {'feasible' if check.feasible else 'infeasible'}")
        if check.feasible:
            row = check.witness.table[query_id]
            if row[correct_response] < 1.0 - eps - _ROW_SUM_TOL or row[abstention] < 1.0 - eps - _ROW_SUM_TOL:
                mismatches.append(f"epsilon={eps}: witness violates honesty constraints")
    results.append(
        PropertyResult(
            "representational_impossibility",
            passed=not mismatches,
            expected=expected.get("representational_impossibility", True),
            detail="; ".join(mismatches) if mismatches else f"{len(eps_cases)} epsilon cases as predicted",
        )
    )

    # Property 2: learnability impossibility and its release.
    n_rules = int(scenario.get("n_update_rules", 30))
    raised_budget = float(scenario.get("raised_budget", supervisor.budget))
    raised = SupervisorSpec(raised_budget, cost_model, reward_rule)
    identical = 0
    diverged = 0
    regime_error = None
    for i in range(n_rules):
        rule = random_update_rule(seed * 7919 + i, responses)
        kwargs = dict(
            query_id=query_id,
            responses=responses,
            fabrication=fabrication,
            abstention=abstention,
        )
        try:
            t_a = run_learning(rule, supervisor, world_a, seed + i, steps, **kwargs)
            t_b = run_learning(rule, supervisor, world_b, seed + i, steps, **kwargs)
        except CostModelViolatesRegime as exc:
            regime_error = str(exc)
            break
        if trajectories_identical(t_a, t_b):
            identical += 1
        r_a = run_learning(rule, raised, world_a, seed + i, steps, expect_regime=False, **kwargs)
        r_b = run_learning(rule, raised, world_b, seed + i, steps, expect_regime=False, **kwargs)
        if not trajectories_identical(r_a, r_b):
            diverged += 1
    if regime_error is not None:
        raise CostModelViolatesRegime(regime_error)
    min_diverged = int(scenario.get("min_diverged", math.ceil(0.95 * n_rules)))
    learn_ok = identical == n_rules and diverged >= min_diverged
    results.append(
        PropertyResult(
            "learnability_impossibility",
            passed=learn_ok,
            expected=expected.get("learnability_impossibility", True),
            detail=f"{identical}/{n_rules} identical under regime; {diverged}/{n_rules} diverged at budget {raised_budget}",
        )
    )

    # Property 3: observation monotonicity across layered judges.
    stack_cfg = scenario.get("judge_stacks", {})
    n_stacks = int(stack_cfg.get("count", 40))
    max_depth = int(stack_cfg.get("max_depth", 8))
    gen = random.Random(seed * 104729)
    stable = True
    for i in range(n_stacks):
        depth = gen.randint(0, max_depth)
        judges = [hashing_judge(f"{seed}:{i}:{d}") for d in range(depth)]
        obs = f"obs-{gen.random()}"
        layers = stack_judges(judges, obs, obs)
        if any(a != b for a, b in layers):
            stable = False
            break
    results.append(
        PropertyResult(
            "observation_monotonicity",
            passed=stable,
            expected=expected.get("observation_monotonicity", True),
            detail=f"{n_stacks} stacks up to depth {max_depth} stayed equal" if stable else "layer outputs diverged on equal inputs",
        )
    )

    # Property 4: superlinear verification cost on claim cliques.
    sizes = scenario.get("clique_sizes", [2, 3, 4, 5, 6, 7, 8])
    per_edge = float(scenario.get("per_edge_cost", 1.0))
    per_claim = []
    cost_ok = True
    for n in sizes:
        graph = CompositionGraph.clique(int(n))
        expected_cost = per_edge * n * (n - 1) / 2
        if verification_cost(graph, per_edge) != expected_cost:
            cost_ok = False
        per_claim.append(expected_cost / n)
    if any(b <= a for a, b in zip(per_claim, per_claim[1:])):
        cost_ok = False
    results.append(
        PropertyResult(
            "superlinear_verification_cost",
            passed=cost_ok,
            expected=expected.get("superlinear_verification_cost", True),
            detail=f"per-claim cost strictly increasing over clique sizes {list(sizes)}",
        )
    )

    # Tensor-mode extras: the text-only counterexample and the escape.
    profiles = [
        ResponseProfile(
            text=p["text"],
            kind=ResponseKind(p["kind"]),
            provenance=Provenance(p["provenance"]),
            topology=Topology(p["topology"]),
        )
        for p in scenario.get("response_profiles", [])
    ]
    if profiles:
        obvious = frozenset(p.text for p in profiles if p.kind is ResponseKind.OBVIOUS_LIE)
        lies = [p for p in profiles if p.kind is ResponseKind.PLAUSIBLE_LIE]
        truths = [p for p in profiles if p.kind is ResponseKind.GROUND_TRUTH]
        counterexample = any(text_only_verify(p, obvious) for p in lies)
        results.append(
            PropertyResult(
                "text_only_counterexample",
                passed=counterexample,
                expected=expected.get("text_only_counterexample", True),
                detail=f"{sum(text_only_verify(p, obvious) for p in lies)}/{len(lies)} plausible lies pass the text-only judge",
            )
        )
        escape = all(not tensor_verify(p, obvious) for p in lies) and any(
            tensor_verify(p, obvious) for p in truths
        )
        results.append(
            PropertyResult(
                "tensor_escape",
                passed=escape,
                expected=expected.get("tensor_escape", True),
                detail="no plausible lie passes provenance+topology checks; grounded responses do",
            )
        )

    return PropertiesReport(scenario.get("name", "scenario"), tuple(results))
