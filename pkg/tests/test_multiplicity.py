"""Level-set construction and the ambiguity/discrepancy metrics."""

import numpy as np
import pytest

from kgeaudit.errors import ConfigError
from kgeaudit.graph import queries_from_split
from kgeaudit.models import ModelConfig
from kgeaudit.multiplicity import (
    ambiguity_from_matrix,
    build_level_set,
    conflict_flags,
    conflict_matrix,
    discrepancy_bound,
    discrepancy_from_matrix,
    evaluate_level_set,
    evaluate_with_aggregation,
    member_seeds,
    performance_difference,
    train_member_models,
)
from kgeaudit.ranking import EvalResult, evaluate
from kgeaudit.training import derive_seed, train_many

CONFIG = ModelConfig(
    method="distmult",
    embedding_dim=4,
    loss="cross_entropy",
    negatives_per_positive=2,
    learning_rate=0.2,
    epochs=4,
    optimizer="adagrad",
)


def _eval_result(flags):
    flags = np.asarray(flags, dtype=bool)
    return EvalResult(k=10, filtered=True, tie_handling="optimistic",
                      ranks=np.ones(flags.shape[0], dtype=np.int64), top_k=flags)


def test_conflict_flags_are_symmetric_differences():
    base = _eval_result([True, True, False, False])
    other = _eval_result([True, False, False, True])
    np.testing.assert_array_equal(conflict_flags(base, other), [False, True, False, True])
    with pytest.raises(ValueError):
        conflict_flags(base, _eval_result([True]))


def test_metrics_from_matrix():
    matrix = np.array(
        [
            [True, False, False, False],
            [True, True, False, False],
        ]
    )
    assert ambiguity_from_matrix(matrix) == 0.5
    assert discrepancy_from_matrix(matrix) == 0.5
    # any-conflict union always dominates the worst single row
    assert ambiguity_from_matrix(matrix) >= discrepancy_from_matrix(matrix)


def test_empty_matrix_metrics_are_zero():
    empty = conflict_matrix(_eval_result([True, False]), [])
    assert empty.shape == (0, 2)
    assert ambiguity_from_matrix(empty) == 0.0
    assert discrepancy_from_matrix(empty) == 0.0


def test_ambiguity_dominates_discrepancy_on_random_matrices(rng):
    for _ in range(200):
        matrix = rng.random((int(rng.integers(1, 6)), int(rng.integers(1, 40)))) < 0.3
        assert ambiguity_from_matrix(matrix) >= discrepancy_from_matrix(matrix) - 1e-15


def test_bound_arithmetic():
    raw, clamped = discrepancy_bound(0.518, 0.01)
    assert raw == pytest.approx(0.974)
    assert clamped == pytest.approx(0.974)
    raw, clamped = discrepancy_bound(0.2, 0.05)
    assert raw == pytest.approx(1.65)
    assert clamped == 1.0
    raw, clamped = discrepancy_bound(1.0, 0.0)
    assert raw == 0.0 and clamped == 0.0
    assert performance_difference(0.9, 0.85) == pytest.approx(0.05)


def test_level_set_argument_validation(small_graph):
    with pytest.raises(ConfigError):
        build_level_set(small_graph, CONFIG, epsilon=-0.1, target_size=2, master_seed=1)
    with pytest.raises(ConfigError):
        build_level_set(small_graph, CONFIG, epsilon=0.1, target_size=0, master_seed=1)
    with pytest.raises(ConfigError):
        build_level_set(small_graph, CONFIG, epsilon=0.1, target_size=5,
                        master_seed=1, max_attempts=3)


@pytest.fixture(scope="module")
def pool(small_graph):
    """A 8-model pool plus baseline, trained once and thresholded many times."""
    baseline_cfg = CONFIG.replace(seed=derive_seed(42, "baseline"))
    configs = [CONFIG.replace(seed=derive_seed(42, "competitor", i)) for i in range(1, 9)]
    runs = train_many(small_graph, [baseline_cfg] + configs, workers=1)
    return runs[0].model, [r.model for r in runs[1:]]


def test_admitted_models_respect_epsilon(small_graph, pool):
    baseline, candidates = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.05, target_size=8,
                            master_seed=42, max_attempts=8, baseline=baseline,
                            candidates=candidates)
    assert level.attempts == 8
    assert level.rejected == 8 - len(level.competitors)
    for delta in level.admission_deltas:
        assert delta <= 0.05 + 1e-12


def test_level_sets_nest_as_epsilon_grows(small_graph, pool):
    baseline, candidates = pool
    sizes = []
    for eps in (0.0, 0.02, 0.05, 0.1, 0.5):
        level = build_level_set(small_graph, CONFIG, epsilon=eps, target_size=8,
                                master_seed=42, max_attempts=8, baseline=baseline,
                                candidates=candidates)
        sizes.append(len(level.competitors))
    assert sizes == sorted(sizes)
    assert sizes[-1] == 8  # a wide-open threshold admits the whole pool


def test_report_metrics_and_structure(small_graph, pool):
    baseline, candidates = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.5, target_size=8,
                            master_seed=42, max_attempts=8, baseline=baseline,
                            candidates=candidates)
    queries = queries_from_split(small_graph, "test")
    report = evaluate_level_set(level, small_graph, queries)
    assert report.rule == "none"
    assert report.n_models == len(level.competitors)
    assert report.n_queries == len(queries)
    assert report.ambiguity >= report.discrepancy
    assert 0.0 <= report.discrepancy <= 1.0
    assert report.bound == min(1.0, report.bound_raw)
    assert report.model_ids[0] == "competitor_01"
    assert report.conflicts.shape == (report.n_models, report.n_queries)
    np.testing.assert_array_equal(report.per_query_conflict, report.conflicts.any(axis=0))
    assert report.eps_deviation == 0.0
    # every competitor's conflict rate individually honors the definition
    for row, ev in zip(report.conflicts, report.model_evals):
        np.testing.assert_array_equal(row, report.baseline_eval.top_k != ev.top_k)


def test_identical_competitors_yield_zero_multiplicity(small_graph, pool):
    baseline, _ = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.0, target_size=3,
                            master_seed=42, max_attempts=3, baseline=baseline,
                            candidates=[baseline, baseline, baseline])
    queries = queries_from_split(small_graph, "test")
    report = evaluate_level_set(level, small_graph, queries)
    assert report.n_models == 3
    assert report.ambiguity == 0.0
    assert report.discrepancy == 0.0
    assert report.admission_deltas == [0.0, 0.0, 0.0]


def test_member_seeds_reuse_the_competitor_seed(small_graph, pool):
    baseline, candidates = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.5, target_size=4,
                            master_seed=42, max_attempts=8, baseline=baseline,
                            candidates=candidates)
    seeds = member_seeds(level, 2, 3)
    assert seeds[0] == level.competitors[1].config.seed
    assert seeds[1] == derive_seed(42, "member", 2, 2)
    assert seeds[2] == derive_seed(42, "member", 2, 3)
    assert len(set(seeds)) == 3


def test_single_member_aggregation_matches_raw_metrics(small_graph, pool):
    """Borda and range points are strictly order-preserving per ballot, so a
    one-ballot aggregate carries the competitor's exact weak order and the
    report must match the raw one. Majority does not qualify: it collapses
    everything below a ballot's top block into one indifference class."""
    baseline, candidates = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.5, target_size=3,
                            master_seed=42, max_attempts=8, baseline=baseline,
                            candidates=candidates)
    queries = queries_from_split(small_graph, "test")
    raw = evaluate_level_set(level, small_graph, queries)
    members = train_member_models(level, 1, small_graph)
    for rule in ("borda", "range"):
        agg = evaluate_with_aggregation(level, rule, 1, small_graph, queries,
                                        member_models=members)
        assert agg.ambiguity == raw.ambiguity
        assert agg.discrepancy == raw.discrepancy
        assert agg.model_hits == raw.model_hits
        np.testing.assert_array_equal(agg.conflicts, raw.conflicts)
    majority = evaluate_with_aggregation(level, "majority", 1, small_graph, queries,
                                         member_models=members)
    assert majority.ambiguity >= majority.discrepancy
    assert majority.n_models == raw.n_models


def test_member_models_share_slot_zero(small_graph, pool):
    baseline, candidates = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.5, target_size=2,
                            master_seed=42, max_attempts=8, baseline=baseline,
                            candidates=candidates)
    members = train_member_models(level, 2, small_graph)
    assert set(members) == {1, 2}
    for i in (1, 2):
        assert members[i][0] is level.competitors[i - 1]
        assert members[i][1].config.seed == derive_seed(42, "member", i, 2)


def test_aggregation_argument_validation(small_graph, pool):
    baseline, candidates = pool
    level = build_level_set(small_graph, CONFIG, epsilon=0.5, target_size=2,
                            master_seed=42, max_attempts=8, baseline=baseline,
                            candidates=candidates)
    queries = queries_from_split(small_graph, "test")
    with pytest.raises(ConfigError):
        evaluate_with_aggregation(level, "plurality", 1, small_graph, queries)
    with pytest.raises(ConfigError):
        evaluate_with_aggregation(level, "borda", 0, small_graph, queries)


def test_retraining_path_builds_a_full_set(small_graph):
    level = build_level_set(small_graph, CONFIG, epsilon=0.8, target_size=3,
                            master_seed=9, max_attempts=6)
    assert len(level.competitors) == 3
    assert level.baseline.config.seed == derive_seed(9, "baseline")
    assert level.competitors[0].config.seed == derive_seed(9, "competitor", 1)
    # admission metrics recompute to the stored values
    queries = queries_from_split(small_graph, "valid")
    base = evaluate(level.baseline, small_graph, queries, 10, True, "optimistic")
    assert base.hits_at_k == level.baseline_admission_hits


def test_admission_split_with_no_queries_is_an_error(write_triples):
    from kgeaudit.graph import load_graph

    graph = load_graph(
        write_triples("train.txt", [("a", "r", "b"), ("b", "r", "c")]),
        write_triples("valid.txt", []),
        write_triples("test.txt", [("a", "r", "c")]),
    )
    with pytest.raises(ConfigError):
        build_level_set(graph, CONFIG, epsilon=0.1, target_size=1, master_seed=1,
                        admission_split="valid")
