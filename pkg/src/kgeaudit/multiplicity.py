"""Predictive-multiplicity quantification over near-equivalent models.

A competitor is admitted to the epsilon level set when its Hits@K on the
admission split trails the baseline's by at most epsilon. Against that set,
per query q and model M the conflict indicator is

    conflict(q, M) = [top-K flag of M differs from the baseline's]

and the two population metrics are

    ambiguity    fraction of queries with a conflict under any competitor
    discrepancy  worst per-model conflict rate

Ambiguity always dominates discrepancy. The discrepancy of any admitted
competitor is bounded by 2 * (1 - Hits@K(baseline)) + epsilon when its
performance difference stays within epsilon on the split being measured.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .graph import KnowledgeGraph, queries_from_split
from .models import EmbeddingModel
from .ranking import DEFAULT_K, EvalResult, evaluate
from .training import TrainRun, derive_seed, train_many
from .voting import RULES, aggregate_models

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS_FACTOR = 4


def conflict_flags(base: EvalResult, other: EvalResult) -> np.ndarray:
    """Per-query disagreement of top-K membership flags."""
    if base.top_k.shape != other.top_k.shape:
        raise ValueError("evaluations cover different query counts")
    return base.top_k != other.top_k


def conflict_matrix(base: EvalResult, others) -> np.ndarray:
    others = list(others)
    if not others:
        return np.zeros((0, base.top_k.shape[0]), dtype=bool)
    return np.stack([conflict_flags(base, o) for o in others])


def ambiguity_from_matrix(matrix: np.ndarray) -> float:
    if matrix.shape[0] == 0:
        logger.warning("empty level set: ambiguity defined as 0.0")
        return 0.0
    return float(matrix.any(axis=0).mean())


def discrepancy_from_matrix(matrix: np.ndarray) -> float:
    if matrix.shape[0] == 0:
        logger.warning("empty level set: discrepancy defined as 0.0")
        return 0.0
    return float(matrix.mean(axis=1).max())


def discrepancy_bound(baseline_hits: float, epsilon: float) -> tuple[float, float]:
    """(raw, clamped-to-[0,1]) upper bound 2 * (1 - Hits@K) + epsilon."""
    raw = 2.0 * (1.0 - baseline_hits) + epsilon
    return raw, min(1.0, raw)


def performance_difference(baseline_hits: float, model_hits: float) -> float:
    """Signed Hits@K shortfall of a model against the baseline."""
    return baseline_hits - model_hits


@dataclass
class LevelSet:
    baseline: EmbeddingModel
    competitors: list[EmbeddingModel]
    epsilon: float
    k: int
    admission_split: str
    filtered: bool
    tie_handling: str
    baseline_admission_hits: float
    competitor_admission_hits: list[float]
    attempts: int
    rejected: int
    master_seed: int

    @property
    def admission_deltas(self) -> list[float]:
        return [
            performance_difference(self.baseline_admission_hits, h)
            for h in self.competitor_admission_hits
        ]


def build_level_set(
    graph: KnowledgeGraph,
    config,
    epsilon: float,
    target_size: int,
    master_seed: int,
    max_attempts: int | None = None,
    k: int = DEFAULT_K,
    admission_split: str = "valid",
    filtered: bool = True,
    tie_handling: str = "optimistic",
    workers: int = 1,
    baseline: EmbeddingModel | None = None,
    candidates: list[EmbeddingModel] | None = None,
) -> LevelSet:
    """Retrains the baseline config under fresh derived seeds and admits the
    retrains whose admission-split Hits@K trails the baseline by at most
    epsilon, until target_size admissions or max_attempts candidates.

    Pass `candidates` to threshold an existing pool instead of training; the
    pool must have been trained with seeds derived from the same master seed
    for replays to line up.
    """
    if epsilon < 0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")
    if target_size < 1:
        raise ConfigError(f"target_size must be >= 1, got {target_size}")
    if max_attempts is None:
        max_attempts = DEFAULT_MAX_ATTEMPTS_FACTOR * target_size
    if max_attempts < target_size:
        raise ConfigError("max_attempts must be at least target_size")
    queries = queries_from_split(graph, admission_split)
    if not queries:
        raise ConfigError(f"admission split {admission_split!r} has no queries")

    if baseline is None:
        baseline_cfg = config.replace(seed=derive_seed(master_seed, "baseline"))
        baseline = train_many(graph, [baseline_cfg], workers=1)[0].model
    baseline_hits = evaluate(baseline, graph, queries, k, filtered, tie_handling).hits_at_k

    admitted: list[EmbeddingModel] = []
    admitted_hits: list[float] = []
    attempts = 0
    if candidates is None:
        candidate_configs = [
            config.replace(seed=derive_seed(master_seed, "competitor", i))
            for i in range(1, max_attempts + 1)
        ]
        chunk = max(1, workers)
        trained: list[EmbeddingModel] = []
        cursor = 0
        while len(admitted) < target_size and attempts < max_attempts:
            if attempts == len(trained):
                batch = candidate_configs[cursor : cursor + chunk]
                trained.extend(r.model for r in train_many(graph, batch, workers))
                cursor += len(batch)
            model = trained[attempts]
            attempts += 1
            hits = evaluate(model, graph, queries, k, filtered, tie_handling).hits_at_k
            if performance_difference(baseline_hits, hits) <= epsilon:
                admitted.append(model)
                admitted_hits.append(hits)
    else:
        for model in candidates:
            if len(admitted) >= target_size:
                break
            attempts += 1
            hits = evaluate(model, graph, queries, k, filtered, tie_handling).hits_at_k
            if performance_difference(baseline_hits, hits) <= epsilon:
                admitted.append(model)
                admitted_hits.append(hits)

    if len(admitted) < target_size:
        # expected when thresholding a fixed pool; a problem when retraining
        # to a target could not fill the set
        log = logger.info if candidates is not None else logger.warning
        log(
            "level set admitted %d of %d after %d attempts (epsilon=%g)",
            len(admitted), target_size, attempts, epsilon,
        )
    return LevelSet(
        baseline=baseline,
        competitors=admitted,
        epsilon=epsilon,
        k=k,
        admission_split=admission_split,
        filtered=filtered,
        tie_handling=tie_handling,
        baseline_admission_hits=baseline_hits,
        competitor_admission_hits=admitted_hits,
        attempts=attempts,
        rejected=attempts - len(admitted),
        master_seed=master_seed,
    )


@dataclass
class MultiplicityReport:
    rule: str            # "none" or a voting rule
    k: int
    epsilon: float
    admission_split: str
    filtered: bool
    tie_handling: str
    n_queries: int
    n_models: int
    baseline_hits: float
    model_hits: list[float]
    mean_hits: float
    ambiguity: float
    discrepancy: float
    bound: float
    bound_raw: float
    admission_deltas: list[float]
    eps_deviation: float
    model_ids: list[str] = field(default_factory=list)
    n_aggregate: int | None = None
    conflicts: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))
    baseline_eval: EvalResult | None = None
    model_evals: list[EvalResult] = field(default_factory=list)

    @property
    def per_query_conflict(self) -> np.ndarray:
        if self.conflicts.shape[0] == 0:
            return np.zeros(self.n_queries, dtype=bool)
        return self.conflicts.any(axis=0)


def _finish_report(rule, level_set, queries, base_eval, model_evals, model_ids,
                   admission_deltas, n_aggregate) -> MultiplicityReport:
    matrix = conflict_matrix(base_eval, model_evals)
    amb = ambiguity_from_matrix(matrix)
    dis = discrepancy_from_matrix(matrix)
    bound_raw, bound = discrepancy_bound(base_eval.hits_at_k, level_set.epsilon)
    hits = [e.hits_at_k for e in model_evals]
    deviation = max([0.0] + [d - level_set.epsilon for d in admission_deltas])
    return MultiplicityReport(
        rule=rule,
        k=level_set.k,
        epsilon=level_set.epsilon,
        admission_split=level_set.admission_split,
        filtered=level_set.filtered,
        tie_handling=level_set.tie_handling,
        n_queries=len(queries),
        n_models=len(model_evals),
        baseline_hits=base_eval.hits_at_k,
        model_hits=hits,
        mean_hits=float(np.mean(hits)) if hits else 0.0,
        ambiguity=amb,
        discrepancy=dis,
        bound=bound,
        bound_raw=bound_raw,
        admission_deltas=admission_deltas,
        eps_deviation=deviation,
        model_ids=model_ids,
        n_aggregate=n_aggregate,
        conflicts=matrix,
        baseline_eval=base_eval,
        model_evals=model_evals,
    )


def evaluate_level_set(level_set: LevelSet, graph: KnowledgeGraph, queries) -> MultiplicityReport:
    """Multiplicity metrics of the raw level set on `queries`."""
    base_eval = evaluate(level_set.baseline, graph, queries, level_set.k,
                         level_set.filtered, level_set.tie_handling)
    model_evals = [
        evaluate(m, graph, queries, level_set.k, level_set.filtered, level_set.tie_handling)
        for m in level_set.competitors
    ]
    ids = [f"competitor_{i:02d}" for i in range(1, len(model_evals) + 1)]
    return _finish_report("none", level_set, queries, base_eval, model_evals, ids,
                          level_set.admission_deltas, None)


def member_seeds(level_set: LevelSet, index: int, n_aggregate: int) -> list[int]:
    """Training seeds for the aggregation behind competitor `index` (1-based).

    The first member reuses the competitor's own seed, so aggregating a
    single ballot reproduces the competitor exactly; the rest are fresh
    derived seeds.
    """
    competitor = level_set.competitors[index - 1]
    extra = [
        derive_seed(level_set.master_seed, "member", index, j)
        for j in range(2, n_aggregate + 1)
    ]
    return [competitor.config.seed] + extra


def train_member_models(level_set: LevelSet, n_aggregate: int, graph: KnowledgeGraph,
                        workers: int = 1) -> dict[int, list[EmbeddingModel]]:
    """All aggregation members for every competitor, keyed by 1-based
    competitor index. Reused across voting rules: the members depend only on
    seeds, not on the rule."""
    jobs = []
    slots = []
    members: dict[int, list[EmbeddingModel]] = {}
    for i, competitor in enumerate(level_set.competitors, start=1):
        members[i] = [None] * n_aggregate
        members[i][0] = competitor
        for j, seed in enumerate(member_seeds(level_set, i, n_aggregate)):
            if j == 0:
                continue
            jobs.append(competitor.config.replace(seed=seed))
            slots.append((i, j))
    runs = train_many(graph, jobs, workers)
    for (i, j), run in zip(slots, runs):
        members[i][j] = run.model
    return members


def evaluate_with_aggregation(
    level_set: LevelSet,
    rule: str,
    n_aggregate: int,
    graph: KnowledgeGraph,
    queries,
    member_models: dict[int, list[EmbeddingModel]] | None = None,
    workers: int = 1,
) -> MultiplicityReport:
    """Multiplicity metrics after replacing each competitor with the
    aggregation of n_aggregate same-config retrains under `rule`.

    Conflicts stay referenced to the original baseline. admission_deltas and
    eps_deviation report how far each aggregated ranking drifts from the
    baseline on the admission split, beyond the level set's epsilon.
    """
    if rule not in RULES:
        raise ConfigError(f"unknown voting rule {rule!r}; expected one of {RULES}")
    if n_aggregate < 1:
        raise ConfigError(f"n_aggregate must be >= 1, got {n_aggregate}")
    if member_models is None:
        member_models = train_member_models(level_set, n_aggregate, graph, workers)

    base_eval = evaluate(level_set.baseline, graph, queries, level_set.k,
                         level_set.filtered, level_set.tie_handling)
    admission_queries = queries_from_split(graph, level_set.admission_split)

    model_evals = []
    admission_deltas = []
    ids = []
    for i in range(1, len(level_set.competitors) + 1):
        members = member_models[i][:n_aggregate]
        if len(members) < n_aggregate:
            raise ConfigError(
                f"competitor {i} has {len(members)} member models, need {n_aggregate}"
            )
        agg_test = aggregate_models(members, rule, queries, graph, level_set.filtered)
        model_evals.append(agg_test.evaluate(queries, level_set.k, level_set.tie_handling,
                                             level_set.filtered))
        agg_adm = aggregate_models(members, rule, admission_queries, graph, level_set.filtered)
        adm_hits = agg_adm.evaluate(admission_queries, level_set.k, level_set.tie_handling,
                                    level_set.filtered).hits_at_k
        admission_deltas.append(
            performance_difference(level_set.baseline_admission_hits, adm_hits)
        )
        ids.append(f"aggregated_{rule}_{i:02d}")

    return _finish_report(rule, level_set, queries, base_eval, model_evals, ids,
                          admission_deltas, n_aggregate)
