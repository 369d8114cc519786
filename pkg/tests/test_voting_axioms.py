"""Social-choice properties of the three rules on randomized profiles.

The heavy 1000-profile sweep lives in the acceptance suite; here hypothesis
shrinks any violation it finds to a minimal matrix, which is far easier to
debug than a seed index.
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import axioms

score_matrices = st.integers(min_value=1, max_value=5).flatmap(
    lambda n: st.integers(min_value=2, max_value=5).flatmap(
        lambda m: arrays(
            dtype=np.float64,
            shape=(n, m),
            elements=st.integers(min_value=-4, max_value=4).map(float),
        )
    )
)


@given(score_matrices, st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=120)
def test_axioms_hold_on_arbitrary_profiles(matrix, seed):
    rng = np.random.default_rng(seed)
    assert axioms.check_all(matrix, rng) == []


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=120)
def test_axioms_hold_on_generator_profiles(seed):
    # the same generator the acceptance sweep uses, including planted
    # dominated candidates and real-valued ballots
    rng = np.random.default_rng(seed)
    matrix = axioms.random_profile(rng)
    assert axioms.check_all(matrix, rng) == []


def test_checkers_catch_a_broken_rule(monkeypatch):
    """The checkers must be able to fail: a rule that favors low candidate
    ids violates neutrality on asymmetric profiles."""
    import kgeaudit.voting as voting

    biased = dict(voting._POINT_FUNCTIONS)
    original = biased["borda"]
    biased["borda"] = lambda scores: original(scores) + np.arange(len(scores), 0, -1)
    monkeypatch.setattr(voting, "_POINT_FUNCTIONS", biased)

    rng = np.random.default_rng(5)
    found = []
    for _ in range(50):
        matrix = axioms.random_profile(rng)
        found += axioms.check_neutrality(matrix, rng)
    assert found, "a label-biased rule must trip the neutrality checker"
