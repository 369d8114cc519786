import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from pathlib import Path

from kgeaudit.graph import load_graph

import synthgen

# deterministic hypothesis runs: failures must reproduce in CI byte for byte
settings.register_profile(
    "kgeaudit",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("kgeaudit")

REPO_ROOT = Path(__file__).resolve().parents[1]
NATIONS_DIR = REPO_ROOT / "data" / "nations-synth"


@pytest.fixture(scope="session")
def nations_graph():
    return load_graph(
        NATIONS_DIR / "train.txt", NATIONS_DIR / "valid.txt", NATIONS_DIR / "test.txt"
    )


@pytest.fixture(scope="session")
def small_graph(tmp_path_factory):
    """A 20-entity, 4-relation random dataset, shared read-only."""
    root = tmp_path_factory.mktemp("small-kg")
    paths = synthgen.write_dataset(root, seed=11, n_entities=20, n_relations=4,
                                   sizes=(160, 24, 24))
    return load_graph(*paths)


@pytest.fixture()
def write_triples(tmp_path):
    """Factory writing a triple file from (h, r, t) label rows."""

    def _write(name, rows):
        path = tmp_path / name
        path.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in rows), encoding="utf-8")
        return path

    return _write


@pytest.fixture()
def rng():
    return np.random.default_rng(20260814)
