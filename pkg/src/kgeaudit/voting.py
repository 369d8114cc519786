"""Rank aggregation over per-query candidate rankings.

Each model casts one ballot per query: its raw scores over the unmasked
candidate entities. Three positional scoring rules turn a profile of ballots
into one aggregate ranking:

  majority  1 point to a ballot's top candidate; an exact score tie at the
            top splits the point equally among the tied candidates
  borda     m-1, m-2, ..., 0 points by ballot position; candidates tied at
            equal scores share the average of the points their block spans
  range     raw scores rescaled per ballot to [-1, 1] by
            2 * (s - min) / (max - min) - 1, then summed; a constant ballot
            contributes 0 to every candidate

All three award points per ballot independently of voter identity and
candidate labels, and totals add across ballots, so anonymity, neutrality,
and reinforcement hold by construction. Final orders break exact total ties
by ascending entity id and mark them as indifference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleModelsError
from .graph import KnowledgeGraph, Query
from .models import EmbeddingModel, require_compatible, score_all_candidates
from .ranking import EvalResult, candidate_mask, top_k_from_ranks

RULES = ("majority", "borda", "range")


@dataclass
class Ballot:
    voter_id: str
    scores: np.ndarray  # aligned with the profile's candidate array


@dataclass
class Profile:
    candidates: np.ndarray  # entity ids, strictly increasing
    ballots: list[Ballot] = field(default_factory=list)
    query: Query | None = None

    def validate(self) -> None:
        if self.candidates.size == 0:
            raise ValueError("profile has no candidates")
        if not self.ballots:
            raise ValueError("profile has no ballots")
        if np.any(np.diff(self.candidates) <= 0):
            raise ValueError("candidate ids must be strictly increasing")
        for ballot in self.ballots:
            if ballot.scores.shape != self.candidates.shape:
                raise ValueError(
                    f"ballot {ballot.voter_id!r} has {ballot.scores.shape[0]} scores "
                    f"for {self.candidates.shape[0]} candidates"
                )
            if not np.all(np.isfinite(ballot.scores)):
                raise ValueError(f"ballot {ballot.voter_id!r} has non-finite scores")


def normalize_range_scores(scores: np.ndarray) -> np.ndarray:
    """Affine rescale of one ballot to [-1, 1]; constant ballots map to all
    zeros (no preference information, no weight)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot normalize an empty score vector")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    lo = scores.min()
    hi = scores.max()
    if hi == lo:
        return np.zeros_like(scores)
    return 2.0 * (scores - lo) / (hi - lo) - 1.0


def _points_majority(scores: np.ndarray) -> np.ndarray:
    top = scores == scores.max()
    return top / top.sum()


def _points_borda(scores: np.ndarray) -> np.ndarray:
    m = scores.shape[0]
    order = np.argsort(-scores, kind="stable")
    position_points = np.arange(m - 1, -1, -1, dtype=np.float64)
    points = np.empty(m, dtype=np.float64)
    i = 0
    while i < m:
        j = i
        while j + 1 < m and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        points[order[i : j + 1]] = position_points[i : j + 1].mean()
        i = j + 1
    return points


_POINT_FUNCTIONS = {
    "majority": _points_majority,
    "borda": _points_borda,
    "range": normalize_range_scores,
}


@dataclass
class AggregatedRanking:
    rule: str
    candidates: np.ndarray
    totals: np.ndarray
    query: Query | None = None

    @property
    def order(self) -> np.ndarray:
        """Candidate ids by descending total, ascending id within ties."""
        idx = np.lexsort((self.candidates, -self.totals))
        return self.candidates[idx]

    @property
    def tied_with_previous(self) -> np.ndarray:
        """Aligned with `order`; True where a candidate's total equals the
        previous one's, i.e. the order between them is indifference, not
        preference."""
        idx = np.lexsort((self.candidates, -self.totals))
        sorted_totals = self.totals[idx]
        flags = np.zeros(len(idx), dtype=bool)
        flags[1:] = sorted_totals[1:] == sorted_totals[:-1]
        return flags

    def winners(self) -> np.ndarray:
        """All candidates with the maximum total."""
        return self.candidates[self.totals == self.totals.max()]

    def total_of(self, entity: int) -> float:
        pos = np.searchsorted(self.candidates, entity)
        if pos >= len(self.candidates) or self.candidates[pos] != entity:
            raise KeyError(f"entity {entity} is not a candidate")
        return float(self.totals[pos])

    def rank_pair(self, entity: int) -> tuple[int, int]:
        """(optimistic, pessimistic) rank of `entity` by totals."""
        total = self.total_of(entity)
        return 1 + int((self.totals > total).sum()), int((self.totals >= total).sum())


def aggregate(profile: Profile, rule: str) -> AggregatedRanking:
    profile.validate()
    points = _POINT_FUNCTIONS.get(rule)
    if points is None:
        raise ValueError(f"unknown voting rule {rule!r}; expected one of {RULES}")
    totals = np.zeros(profile.candidates.shape[0], dtype=np.float64)
    for ballot in profile.ballots:
        totals += points(ballot.scores)
    return AggregatedRanking(
        rule=rule, candidates=profile.candidates.copy(), totals=totals, query=profile.query
    )


def profile_from_models(models, query: Query, graph: KnowledgeGraph,
                        filtered: bool = True) -> Profile:
    """One ballot per model over the query's unmasked candidates."""
    models = list(models)
    if not models:
        raise IncompatibleModelsError("cannot build a profile from zero models")
    require_compatible(models)
    mask = candidate_mask(graph, query, filtered)
    candidates = np.flatnonzero(~mask).astype(np.int64)
    ballots = []
    for i, model in enumerate(models):
        scores = score_all_candidates(model, query)[candidates]
        ballots.append(Ballot(voter_id=f"voter_{i}", scores=scores))
    return Profile(candidates=candidates, ballots=ballots, query=query)


@dataclass
class AggregatedRankingModel:
    """A virtual model defined only through per-query aggregate rankings.

    For majority and borda the totals are positional points, not scores on
    the model's scale; downstream evaluation must consume ranks, never the
    totals as if they were scalar scores.
    """

    rule: str
    rankings: dict[int, AggregatedRanking]  # keyed by position in the query list

    def evaluate(self, queries, k: int, tie_handling: str = "optimistic",
                 filtered: bool = True) -> EvalResult:
        n = len(queries)
        ranks = np.empty(n, dtype=np.int64)
        flags = np.empty(n, dtype=bool)
        for i, query in enumerate(queries):
            ranking = self.rankings[i]
            opt, pess = ranking.rank_pair(query.gold)
            ranks[i] = opt
            flags[i] = top_k_from_ranks(opt, pess, k, tie_handling)
        return EvalResult(k=k, filtered=filtered, tie_handling=tie_handling,
                          ranks=ranks, top_k=flags)


def aggregate_models(models, rule: str, queries, graph: KnowledgeGraph,
                     filtered: bool = True) -> AggregatedRankingModel:
    """Aggregates the models' per-query rankings into one virtual model."""
    rankings = {}
    for i, query in enumerate(queries):
        profile = profile_from_models(models, query, graph, filtered)
        rankings[i] = aggregate(profile, rule)
    return AggregatedRankingModel(rule=rule, rankings=rankings)
