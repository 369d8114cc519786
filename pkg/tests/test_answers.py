"""Threshold answer sets, Jaccard agreement, and set-valued stability."""

import numpy as np
import pytest

from kgeaudit.answers import (
    agreement_matrix,
    answer_set,
    answer_sets,
    jaccard,
    level_set_answer_metrics,
    set_ambiguity,
    set_conflict_matrix,
    set_discrepancy,
    tau_from_quantile,
)
from kgeaudit.graph import queries_from_split
from kgeaudit.models import ModelConfig, score_all_candidates
from kgeaudit.multiplicity import build_level_set
from kgeaudit.ranking import candidate_mask
from kgeaudit.training import derive_seed, train, train_many

import oracles

CONFIG = ModelConfig(
    method="distmult",
    embedding_dim=4,
    loss="cross_entropy",
    negatives_per_positive=2,
    learning_rate=0.2,
    epochs=4,
    optimizer="adagrad",
)


@pytest.fixture(scope="module")
def trained(small_graph):
    return train(small_graph, CONFIG.replace(seed=13)).model


def test_answer_set_matches_brute_force(small_graph, trained):
    queries = queries_from_split(small_graph, "valid")
    for query in queries[:10]:
        scores = score_all_candidates(trained, query)
        mask = candidate_mask(small_graph, query, True)
        tau = float(np.median(scores))
        got = answer_set(trained, small_graph, query, tau, filtered=True)
        want = oracles.answer_set(scores.tolist(), tau, mask.tolist())
        assert got == want


def test_boundary_scores_are_included(small_graph, trained):
    query = queries_from_split(small_graph, "valid")[0]
    scores = score_all_candidates(trained, query)
    mask = candidate_mask(small_graph, query, True)
    unmasked = np.flatnonzero(~mask)
    tau = float(scores[unmasked[0]])
    result = answer_set(trained, small_graph, query, tau, filtered=True)
    assert int(unmasked[0]) in result
    # nudging the threshold just past the boundary drops that entity
    above = answer_set(trained, small_graph, query, np.nextafter(tau, np.inf),
                       filtered=True)
    boundary = {int(e) for e in unmasked if scores[e] == tau}
    assert result - above == boundary


def test_masked_entities_never_appear(small_graph, trained):
    queries = queries_from_split(small_graph, "valid")
    for query in queries[:10]:
        mask = candidate_mask(small_graph, query, True)
        result = answer_set(trained, small_graph, query, -np.inf, filtered=True)
        assert result == {int(e) for e in np.flatnonzero(~mask)}
        assert all(not mask[e] for e in result)


def test_jaccard_cases():
    assert jaccard(frozenset(), frozenset()) == 1.0
    assert jaccard(frozenset({1, 2}), frozenset({1, 2})) == 1.0
    assert jaccard(frozenset({1, 2}), frozenset({2, 3})) == pytest.approx(1 / 3)
    assert jaccard(frozenset({1}), frozenset()) == 0.0


def test_set_matrix_and_metrics():
    base = [frozenset({1}), frozenset({2}), frozenset()]
    rows = [
        [frozenset({1}), frozenset({2}), frozenset()],      # identical
        [frozenset({1}), frozenset({9}), frozenset({3})],   # two conflicts
    ]
    matrix = set_conflict_matrix(base, rows)
    np.testing.assert_array_equal(
        matrix, [[False, False, False], [False, True, True]]
    )
    assert set_ambiguity(matrix) == pytest.approx(2 / 3)
    assert set_discrepancy(matrix) == pytest.approx(2 / 3)
    agreement = agreement_matrix(base, rows)
    np.testing.assert_allclose(agreement, [[1.0, 1.0, 1.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        set_conflict_matrix(base, [[frozenset()]])


def test_empty_rows_degenerate_cleanly():
    matrix = set_conflict_matrix([frozenset({1})], [])
    assert matrix.shape == (0, 1)
    assert set_ambiguity(matrix) == 0.0
    assert set_discrepancy(matrix) == 0.0
    assert agreement_matrix([frozenset({1})], []).shape == (0, 1)


def test_infinite_threshold_empties_every_set(small_graph):
    level = build_level_set(small_graph, CONFIG, epsilon=0.8, target_size=2,
                            master_seed=21, max_attempts=4)
    queries = queries_from_split(small_graph, "test")[:6]
    metrics = level_set_answer_metrics(level, small_graph, queries, tau=np.inf)
    assert metrics["set_ambiguity"] == 0.0
    assert metrics["set_discrepancy"] == 0.0
    assert metrics["mean_agreement"] == 1.0
    assert metrics["baseline_mean_set_size"] == 0.0


def test_level_set_answer_metrics_keys(small_graph):
    level = build_level_set(small_graph, CONFIG, epsilon=0.8, target_size=2,
                            master_seed=21, max_attempts=4)
    queries = queries_from_split(small_graph, "test")[:6]
    metrics = level_set_answer_metrics(level, small_graph, queries, tau=0.0)
    assert set(metrics) == {
        "tau", "n_queries", "n_models", "set_ambiguity", "set_discrepancy",
        "mean_agreement", "per_model_agreement", "baseline_mean_set_size",
    }
    assert metrics["n_queries"] == 6
    assert metrics["n_models"] == 2
    assert metrics["set_ambiguity"] >= metrics["set_discrepancy"] - 1e-15
    assert len(metrics["per_model_agreement"]) == 2


def test_tau_from_quantile_matches_brute_force(small_graph, trained):
    queries = queries_from_split(small_graph, "valid")
    gold_scores = sorted(
        float(score_all_candidates(trained, q)[q.gold]) for q in queries
    )
    assert tau_from_quantile(trained, small_graph, 0.0) == pytest.approx(gold_scores[0])
    assert tau_from_quantile(trained, small_graph, 1.0) == pytest.approx(gold_scores[-1])
    got = tau_from_quantile(trained, small_graph, 0.25)
    assert got == pytest.approx(float(np.quantile(gold_scores, 0.25)))
    # the calibration property: at most a q-fraction of golds score below tau
    below = sum(s < got for s in gold_scores)
    assert below <= 0.25 * len(gold_scores)


def test_tau_quantile_validation(small_graph, trained):
    with pytest.raises(ValueError):
        tau_from_quantile(trained, small_graph, -0.1)
    with pytest.raises(ValueError):
        tau_from_quantile(trained, small_graph, 1.5)
