"""Link-prediction evaluation: ranks, top-K flags, Hits@K.

The canonical rank is optimistic: 1 + the number of unmasked other entities
scoring strictly higher than the gold answer, so equal scores never push the
gold answer down. A tie_handling switch ("optimistic", "pessimistic", "mean")
controls which rank feeds the top-K indicator; the reported rank column stays
optimistic either way.

Filtered evaluation (the default) masks every known-true answer except the
gold one before ranking, across all three splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import KnowledgeGraph, Query
from .models import EmbeddingModel, score_all_candidates

TIE_HANDLING = ("optimistic", "pessimistic", "mean")

DEFAULT_K = 10


@dataclass
class EvalResult:
    k: int
    filtered: bool
    tie_handling: str
    ranks: np.ndarray      # optimistic gold ranks, one per query
    top_k: np.ndarray      # bool, rank under tie_handling <= k

    @property
    def hits_at_k(self) -> float:
        return float(self.top_k.mean())


def candidate_mask(graph: KnowledgeGraph, query: Query, filtered: bool = True) -> np.ndarray:
    """True marks entities excluded from ranking. Filtered evaluation
    excludes known-true answers other than the gold one."""
    mask = np.zeros(graph.num_entities, dtype=bool)
    if filtered:
        mask[graph.true_answers(query)] = True
        mask[query.gold] = False
    return mask


def rank_of(scores: np.ndarray, gold: int, mask: np.ndarray | None = None) -> int:
    """Optimistic rank of `gold` among unmasked candidates."""
    if not 0 <= gold < scores.shape[0]:
        raise IndexError(f"gold entity {gold} out of range for {scores.shape[0]} candidates")
    if mask is not None and mask[gold]:
        raise ValueError("gold entity is masked out of its own query")
    higher = scores > scores[gold]
    if mask is not None:
        higher &= ~mask
    return 1 + int(higher.sum())


def _rank_pair(scores: np.ndarray, gold: int, mask: np.ndarray | None):
    """(optimistic, pessimistic) ranks in one pass."""
    if mask is not None and mask[gold]:
        raise ValueError("gold entity is masked out of its own query")
    s = scores[gold]
    higher = scores > s
    geq = scores >= s
    if mask is not None:
        higher &= ~mask
        geq &= ~mask
    return 1 + int(higher.sum()), int(geq.sum())


def top_k_from_ranks(opt: int, pess: int, k: int, tie_handling: str) -> bool:
    if tie_handling == "optimistic":
        return opt <= k
    if tie_handling == "pessimistic":
        return pess <= k
    if tie_handling == "mean":
        return (opt + pess) / 2.0 <= k
    raise ValueError(f"unknown tie_handling {tie_handling!r}; expected one of {TIE_HANDLING}")


def evaluate_scores(score_rows, golds, masks, k: int, tie_handling: str = "optimistic",
                    filtered: bool = True) -> EvalResult:
    """Evaluation from precomputed per-query score vectors."""
    n = len(golds)
    ranks = np.empty(n, dtype=np.int64)
    flags = np.empty(n, dtype=bool)
    for i in range(n):
        opt, pess = _rank_pair(score_rows[i], golds[i], masks[i] if masks is not None else None)
        ranks[i] = opt
        flags[i] = top_k_from_ranks(opt, pess, k, tie_handling)
    return EvalResult(k=k, filtered=filtered, tie_handling=tie_handling, ranks=ranks, top_k=flags)


def evaluate(model: EmbeddingModel, graph: KnowledgeGraph, queries, k: int = DEFAULT_K,
             filtered: bool = True, tie_handling: str = "optimistic") -> EvalResult:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not queries:
        raise ValueError("no queries to evaluate")
    if tie_handling not in TIE_HANDLING:
        raise ValueError(f"unknown tie_handling {tie_handling!r}; expected one of {TIE_HANDLING}")
    rows = [score_all_candidates(model, q) for q in queries]
    masks = [candidate_mask(graph, q, filtered) for q in queries]
    golds = [q.gold for q in queries]
    return evaluate_scores(rows, golds, masks, k, tie_handling, filtered)


def hits_at_k(model: EmbeddingModel, graph: KnowledgeGraph, queries, k: int = DEFAULT_K,
              filtered: bool = True, tie_handling: str = "optimistic") -> float:
    return evaluate(model, graph, queries, k, filtered, tie_handling).hits_at_k
