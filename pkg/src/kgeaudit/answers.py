"""Score-thresholded answer sets and their stability metrics.

A query's answer set under threshold tau is every unmasked entity scoring at
least tau (boundary inclusive). Across a level set, set-valued analogues of
the ranking metrics replace the top-K indicator with whole-set inequality,
and Jaccard overlap grades how far apart two answer sets are; two empty sets
count as perfect agreement.
"""

from __future__ import annotations

import numpy as np

from .graph import KnowledgeGraph, queries_from_split
from .models import EmbeddingModel, score_all_candidates
from .multiplicity import LevelSet
from .ranking import candidate_mask


def answer_set(model: EmbeddingModel, graph: KnowledgeGraph, query, tau: float,
               filtered: bool = True) -> frozenset[int]:
    scores = score_all_candidates(model, query)
    mask = candidate_mask(graph, query, filtered)
    return frozenset(int(e) for e in np.flatnonzero((scores >= tau) & ~mask))


def answer_sets(model: EmbeddingModel, graph: KnowledgeGraph, queries, tau: float,
                filtered: bool = True) -> list[frozenset[int]]:
    return [answer_set(model, graph, q, tau, filtered) for q in queries]


def jaccard(a: frozenset[int], b: frozenset[int]) -> float:
    """Overlap of two answer sets; both empty is full agreement."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def set_conflict_matrix(base_sets, model_sets_rows) -> np.ndarray:
    """(n_models, n_queries) bool: answer set differs from the baseline's."""
    n_q = len(base_sets)
    rows = []
    for sets in model_sets_rows:
        if len(sets) != n_q:
            raise ValueError("answer-set rows cover different query counts")
        rows.append([a != b for a, b in zip(sets, base_sets)])
    if not rows:
        return np.zeros((0, n_q), dtype=bool)
    return np.array(rows, dtype=bool)


def set_ambiguity(matrix: np.ndarray) -> float:
    if matrix.shape[0] == 0:
        return 0.0
    return float(matrix.any(axis=0).mean())


def set_discrepancy(matrix: np.ndarray) -> float:
    if matrix.shape[0] == 0:
        return 0.0
    return float(matrix.mean(axis=1).max())


def agreement_matrix(base_sets, model_sets_rows) -> np.ndarray:
    """(n_models, n_queries) Jaccard agreement with the baseline's sets."""
    rows = []
    for sets in model_sets_rows:
        rows.append([jaccard(a, b) for a, b in zip(sets, base_sets)])
    if not rows:
        return np.zeros((0, len(base_sets)))
    return np.array(rows, dtype=np.float64)


def level_set_answer_metrics(level_set: LevelSet, graph: KnowledgeGraph, queries,
                             tau: float) -> dict:
    """Set ambiguity/discrepancy and mean agreement of the level set's
    competitors against the baseline at threshold tau."""
    base_sets = answer_sets(level_set.baseline, graph, queries, tau, level_set.filtered)
    model_rows = [
        answer_sets(m, graph, queries, tau, level_set.filtered)
        for m in level_set.competitors
    ]
    conflicts = set_conflict_matrix(base_sets, model_rows)
    agreement = agreement_matrix(base_sets, model_rows)
    return {
        "tau": tau,
        "n_queries": len(queries),
        "n_models": len(model_rows),
        "set_ambiguity": set_ambiguity(conflicts),
        "set_discrepancy": set_discrepancy(conflicts),
        "mean_agreement": float(agreement.mean()) if agreement.size else 1.0,
        "per_model_agreement": [float(row.mean()) for row in agreement],
        "baseline_mean_set_size": float(np.mean([len(s) for s in base_sets])),
    }


def tau_from_quantile(model: EmbeddingModel, graph: KnowledgeGraph, q: float,
                      split: str = "valid", filtered: bool = True) -> float:
    """A threshold calibrated as the q-quantile of the model's scores for
    gold answers on `split`. q=0.2 keeps 80% of gold answers in-set."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile must be in [0, 1], got {q}")
    queries = queries_from_split(graph, split)
    if not queries:
        raise ValueError(f"split {split!r} has no queries")
    gold_scores = [float(score_all_candidates(model, qu)[qu.gold]) for qu in queries]
    return float(np.quantile(gold_scores, q))
