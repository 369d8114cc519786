import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgeaudit.graph import Query, queries_from_split
from kgeaudit.models import ModelConfig
from kgeaudit.ranking import (
    candidate_mask,
    evaluate,
    evaluate_scores,
    hits_at_k,
    rank_of,
    top_k_from_ranks,
)
from kgeaudit.training import train

import oracles


def test_rank_counts_strictly_better_candidates():
    scores = np.array([5.0, 3.0, 4.0, 1.0])
    assert rank_of(scores, 0) == 1
    assert rank_of(scores, 1) == 3
    assert rank_of(scores, 3) == 4


def test_optimistic_rank_ignores_ties():
    scores = np.array([2.0, 2.0, 2.0, 1.0])
    assert rank_of(scores, 1) == 1


def test_mask_removes_competitors():
    scores = np.array([5.0, 3.0, 4.0, 1.0])
    mask = np.array([True, False, False, False])
    assert rank_of(scores, 2, mask) == 1


def test_masked_gold_is_an_error():
    scores = np.array([1.0, 2.0])
    mask = np.array([True, False])
    with pytest.raises(ValueError):
        rank_of(scores, 0, mask)


def test_gold_out_of_range():
    with pytest.raises(IndexError):
        rank_of(np.array([1.0]), 5)


@pytest.mark.parametrize(
    "k,tie,expected",
    [
        (2, "optimistic", True),   # rank 1 <= 2
        (2, "pessimistic", False),  # rank 3 > 2
        (2, "mean", True),          # (1 + 3) / 2 = 2 <= 2
        (1, "mean", False),         # 2 > 1
    ],
)
def test_tie_handling_drives_the_flag(k, tie, expected):
    # three-way tie at the top: optimistic rank 1, pessimistic 3, mean 2
    scores = np.array([7.0, 7.0, 7.0, 0.0])
    result = evaluate_scores([scores], [1], None, k=k, tie_handling=tie)
    assert bool(result.top_k[0]) is expected
    assert result.ranks[0] == 1  # reported rank stays optimistic


def test_top_k_rejects_unknown_handling():
    with pytest.raises(ValueError):
        top_k_from_ranks(1, 1, 10, "lucky")


def test_evaluate_validates_arguments(small_graph, trained_model):
    queries = queries_from_split(small_graph, "test")
    with pytest.raises(ValueError):
        evaluate(trained_model, small_graph, queries, k=0)
    with pytest.raises(ValueError):
        evaluate(trained_model, small_graph, [], k=10)
    with pytest.raises(ValueError):
        evaluate(trained_model, small_graph, queries, k=10, tie_handling="lucky")


@pytest.fixture(scope="module")
def trained_model(small_graph):
    config = ModelConfig(method="distmult", embedding_dim=6, epochs=8,
                         learning_rate=0.1, seed=5)
    return train(small_graph, config).model


def test_filtered_never_ranks_worse_than_raw(small_graph, trained_model):
    queries = queries_from_split(small_graph, "test")
    filt = evaluate(trained_model, small_graph, queries, k=3, filtered=True)
    raw = evaluate(trained_model, small_graph, queries, k=3, filtered=False)
    assert np.all(filt.ranks <= raw.ranks)
    assert np.all(filt.top_k >= raw.top_k)
    assert filt.hits_at_k >= raw.hits_at_k


def test_hits_monotone_in_k(small_graph, trained_model):
    queries = queries_from_split(small_graph, "test")
    values = [hits_at_k(trained_model, small_graph, queries, k=k) for k in (1, 3, 5, 10)]
    assert values == sorted(values)
    assert hits_at_k(trained_model, small_graph, queries, k=small_graph.num_entities) == 1.0


def test_candidate_mask_never_masks_gold(small_graph):
    for q in queries_from_split(small_graph, "valid"):
        mask = candidate_mask(small_graph, q, filtered=True)
        assert not mask[q.gold]
        for e in small_graph.true_answers(q):
            if e != q.gold:
                assert mask[e]


def test_ranks_match_brute_force(rng):
    for _ in range(50):
        n = int(rng.integers(3, 20))
        scores = rng.integers(0, 6, size=n).astype(float)  # heavy ties
        mask = rng.random(n) < 0.3
        gold = int(rng.integers(0, n))
        mask[gold] = False
        result = evaluate_scores([scores], [gold], [mask], k=3, tie_handling="mean")
        assert result.ranks[0] == oracles.optimistic_rank(scores, gold, mask)
        assert bool(result.top_k[0]) == oracles.top_k_flag(scores, gold, 3, "mean", mask)


@given(
    st.lists(st.integers(min_value=-1000, max_value=1000), min_size=2, max_size=30),
    st.integers(min_value=0, max_value=29),
)
def test_rank_invariant_under_monotone_transforms(values, gold_index):
    # integer-valued scores keep 3x + 11 exactly order-preserving in floats
    scores = np.array(values, dtype=np.float64)
    gold = gold_index % len(values)
    transformed = 3.0 * scores + 11.0
    assert rank_of(scores, gold) == rank_of(transformed, gold)


@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=30))
def test_optimistic_rank_never_exceeds_pessimistic(values):
    scores = np.array(values)
    for gold in range(len(values)):
        opt = oracles.optimistic_rank(scores, gold)
        pess = oracles.pessimistic_rank(scores, gold)
        assert 1 <= opt <= pess
        assert rank_of(scores, gold) == opt
