"""Decision rules mapping graph structure to a target-selection strategy.

A rule says "strategy S tends to win when feature F is at least (or at most)
theta", weighted by the absolute correlation behind it. Confidence for a
strategy is the weight share of its satisfied rules; below a floor the
recommendation falls back to RANDOM.
"""

from __future__ import annotations

import enum
import shlex
import statistics
import warnings
from dataclasses import dataclass, field

import scipy.stats

from .centrality import Strategy, StructuralFeatures


class Direction(str, enum.Enum):
    GEQ = "GEQ"
    LEQ = "LEQ"


DEFAULT_CONFIDENCE_FLOOR = 0.30

# Preference order for confidence ties, most frequently winning first.
TIE_ORDER = (Strategy.PAGE, Strategy.BET, Strategy.DEG, Strategy.CLOSE)


@dataclass(frozen=True)
class DecisionRule:
    strategy: Strategy
    feature: str
    direction: Direction
    threshold: float
    weight: float
    label: str

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"rule weight must be in (0, 1], got {self.weight}")
        if self.feature not in StructuralFeatures.__dataclass_fields__:
            raise ValueError(f"rule references unknown feature {self.feature!r}")

    def matches(self, features: StructuralFeatures) -> bool:
        value = getattr(features, self.feature)
        if self.direction is Direction.GEQ:
            return value >= self.threshold
        return value <= self.threshold


@dataclass(frozen=True)
class StrategyRecommendation:
    strategy: Strategy
    confidence: float
    matched: list[str] = field(default_factory=list)
    per_strategy_confidence: dict[Strategy, float] = field(default_factory=dict)


@dataclass(frozen=True)
class AdvantageRecord:
    program: str
    strategy: Strategy
    coverage: float
    advantage: float


_BUILTIN = [
    (Strategy.CLOSE, "diameter", Direction.GEQ, 10.0, 0.525, "Large diameter"),
    (Strategy.CLOSE, "avg_shortest_path", Direction.GEQ, 4.32, 0.472, "Long paths"),
    (Strategy.CLOSE, "closeness_centrality_skew", Direction.GEQ, 5.22, 0.426, "Skewed closeness"),
    (Strategy.CLOSE, "largest_scc_size", Direction.LEQ, 3.0, 0.420, "Small SCCs"),
    (Strategy.CLOSE, "largest_scc_ratio", Direction.LEQ, 0.009, 0.397, "Fragmented"),
    (Strategy.BET, "pagerank_top10_concentration", Direction.GEQ, 0.405, 0.462, "Concentrated PR"),
    (Strategy.BET, "pagerank_gini", Direction.GEQ, 0.406, 0.461, "High PR inequality"),
    (Strategy.BET, "pagerank_skew", Direction.GEQ, 8.18, 0.376, "Skewed PR"),
    (Strategy.BET, "density", Direction.LEQ, 0.003, 0.375, "Sparse graph"),
    (Strategy.BET, "diameter", Direction.GEQ, 10.0, 0.353, "Large diameter"),
    (Strategy.DEG, "closeness_centrality_skew", Direction.GEQ, 5.22, 0.457, "Skewed closeness"),
    (Strategy.DEG, "pagerank_top10_concentration", Direction.GEQ, 0.405, 0.399, "Concentrated PR"),
    (Strategy.DEG, "pagerank_gini", Direction.GEQ, 0.406, 0.392, "High PR inequality"),
    (Strategy.DEG, "diameter", Direction.GEQ, 10.0, 0.389, "Large diameter"),
    (Strategy.DEG, "pagerank_skew", Direction.GEQ, 8.18, 0.317, "Skewed PR"),
    (Strategy.PAGE, "largest_scc_size", Direction.LEQ, 3.0, 0.392, "Small SCCs"),
    (Strategy.PAGE, "largest_scc_ratio", Direction.LEQ, 0.009, 0.388, "Fragmented"),
]


def builtin_rules() -> list[DecisionRule]:
    """The built-in 17-rule set."""
    return [DecisionRule(*row) for row in _BUILTIN]


def evaluate_confidence(
    features: StructuralFeatures, rules: list[DecisionRule]
) -> dict[Strategy, float]:
    """Per-strategy weight share of satisfied rules."""
    total: dict[Strategy, float] = {}
    matched: dict[Strategy, float] = {}
    for rule in rules:
        total[rule.strategy] = total.get(rule.strategy, 0.0) + rule.weight
        if rule.matches(features):
            matched[rule.strategy] = matched.get(rule.strategy, 0.0) + rule.weight
    return {s: matched.get(s, 0.0) / total[s] for s in total}


def recommend(
    features: StructuralFeatures,
    rules: list[DecisionRule] | None = None,
    floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> StrategyRecommendation:
    """Pick the strategy with the highest confidence, RANDOM below the floor."""
    if not 0.0 <= floor < 1.0:
        raise ValueError(f"confidence floor must be in [0, 1), got {floor}")
    if rules is None:
        rules = builtin_rules()
    per_strategy = evaluate_confidence(features, rules)
    order = [s for s in TIE_ORDER if s in per_strategy]
    order += [s for s in sorted(per_strategy, key=lambda s: s.value) if s not in order]
    best = max(order, key=lambda s: (per_strategy[s], -order.index(s)))
    confidence = per_strategy[best]
    if confidence < floor:
        return StrategyRecommendation(Strategy.RANDOM, confidence, [], per_strategy)
    labels = [r.label for r in rules if r.strategy is best and r.matches(features)]
    return StrategyRecommendation(best, confidence, labels, per_strategy)


def compute_advantage(
    coverage_by_strategy: dict[Strategy, float], program: str = ""
) -> list[AdvantageRecord]:
    """Coverage advantage of each strategy over the RANDOM baseline."""
    if Strategy.RANDOM not in coverage_by_strategy:
        raise ValueError("coverage_by_strategy must include a RANDOM baseline")
    baseline = coverage_by_strategy[Strategy.RANDOM]
    return [
        AdvantageRecord(program, s, cov, cov - baseline)
        for s, cov in sorted(coverage_by_strategy.items(), key=lambda kv: kv[0].value)
        if s is not Strategy.RANDOM
    ]


def derive_rules(
    dataset: list[tuple[StructuralFeatures, list[AdvantageRecord]]],
    p_cutoff: float = 0.10,
) -> list[DecisionRule]:
    """Re-derive threshold rules from per-program advantage data.

    For every (strategy, feature) pair whose Pearson correlation is
    significant at p_cutoff, emit a rule thresholded at the feature's median
    over programs where that strategy beat random.
    """
    if len(dataset) < 3:
        raise ValueError("derive_rules needs at least 3 programs")
    strategies = sorted(
        {rec.strategy for _, records in dataset for rec in records}, key=lambda s: s.value
    )
    feature_names = list(StructuralFeatures.__dataclass_fields__)
    rules: list[DecisionRule] = []
    for strat in strategies:
        xs_by_feature: dict[str, list[float]] = {name: [] for name in feature_names}
        advantages: list[float] = []
        positive: dict[str, list[float]] = {name: [] for name in feature_names}
        for features, records in dataset:
            matching = [rec for rec in records if rec.strategy is strat]
            if not matching:
                continue
            advantage = matching[0].advantage
            advantages.append(advantage)
            for name in feature_names:
                value = float(getattr(features, name))
                xs_by_feature[name].append(value)
                if advantage > 0:
                    positive[name].append(value)
        if len(advantages) < 3 or len(set(advantages)) == 1:
            warnings.warn(f"{strat.value}: not enough advantage variation; skipped")
            continue
        for name in feature_names:
            xs = xs_by_feature[name]
            if len(set(xs)) == 1:
                warnings.warn(f"{strat.value}/{name}: zero variance; correlation skipped")
                continue
            r, p = scipy.stats.pearsonr(xs, advantages)
            if not p < p_cutoff:
                continue
            if not positive[name]:
                warnings.warn(f"{strat.value}/{name}: no positive-advantage programs; skipped")
                continue
            threshold = statistics.median(positive[name])
            direction = Direction.GEQ if r > 0 else Direction.LEQ
            symbol = ">=" if direction is Direction.GEQ else "<="
            rules.append(
                DecisionRule(
                    strat, name, direction, threshold, abs(float(r)), f"{name} {symbol} {threshold:.4g}"
                )
            )
    return rules


def format_rules(rules: list[DecisionRule]) -> str:
    """Render rules in the flat text format, one per line."""
    lines = [
        f'{r.strategy.value} {r.feature} {r.direction.value} {r.threshold:g} {r.weight:g} "{r.label}"'
        for r in rules
    ]
    return "\n".join(lines) + "\n"


def parse_rules(text: str) -> list[DecisionRule]:
    """Parse the flat text format; # comments and blank lines are skipped."""
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            tokens = shlex.split(stripped, comments=True)
        except ValueError as exc:
            raise ValueError(f"rules line {lineno}: {exc}") from exc
        if len(tokens) != 6:
            raise ValueError(f"rules line {lineno}: expected 6 fields, got {len(tokens)}")
        strat_tok, feature, direction_tok, threshold_tok, weight_tok, label = tokens
        try:
            rule = DecisionRule(
                Strategy[strat_tok],
                feature,
                Direction[direction_tok],
                float(threshold_tok),
                float(weight_tok),
                label,
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"rules line {lineno}: {exc}") from exc
        rules.append(rule)
    return rules
