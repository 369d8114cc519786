"""Generates the committed nations-synth dataset.

A small dense multi-relational benchmark shaped like the classic 14-country
diplomacy graphs: 14 entities, 55 relations, 1592/199/201 train/valid/test
triples, every relation present in train. Triples are the top-scoring (h, t)
pairs of a low-rank latent-factor model with additive noise, so embedding
models can fit the structure well but not perfectly.

Deterministic: re-running reproduces the committed files byte for byte.

Usage: python3 tools/make_standin_dataset.py [out_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

N_ENTITIES = 14
N_RELATIONS = 55
SPLIT_SIZES = {"train": 1592, "valid": 199, "test": 201}
LATENT_DIM = 5
NOISE_SCALE = 0.6
SEED = 20260814


def generate(rng: np.random.Generator):
    total = sum(SPLIT_SIZES.values())
    entities = [f"nation_{i:02d}" for i in range(N_ENTITIES)]
    relations = [f"relation_{i:02d}" for i in range(N_RELATIONS)]

    u = rng.normal(size=(N_ENTITIES, LATENT_DIM))
    # rank-2 relation operators give correlated, learnable link patterns
    left = rng.normal(size=(N_RELATIONS, LATENT_DIM, 2))
    right = rng.normal(size=(N_RELATIONS, LATENT_DIM, 2))

    # skewed per-relation sizes, each at least 2 so train keeps every relation
    weights = rng.lognormal(mean=0.0, sigma=0.9, size=N_RELATIONS)
    counts = np.maximum(2, np.floor(total * weights / weights.sum()).astype(int))
    while counts.sum() != total:
        step = 1 if counts.sum() < total else -1
        idx = rng.integers(0, N_RELATIONS)
        if counts[idx] + step >= 2:
            counts[idx] += step

    triples: list[tuple[int, int, int]] = []
    first_per_relation: list[tuple[int, int, int]] = []
    for r in range(N_RELATIONS):
        operator = left[r] @ right[r].T
        logits = u @ operator @ u.T + NOISE_SCALE * rng.normal(size=(N_ENTITIES, N_ENTITIES))
        np.fill_diagonal(logits, -np.inf)  # no self-loops
        flat_order = np.argsort(-logits, axis=None, kind="stable")
        picked = flat_order[: counts[r]]
        heads, tails = np.unravel_index(picked, logits.shape)
        pairs = [(int(h), r, int(t)) for h, t in zip(heads, tails)]
        first_per_relation.append(pairs[0])
        triples.extend(pairs[1:])

    perm = rng.permutation(len(triples))
    shuffled = [triples[i] for i in perm]
    train = list(first_per_relation)
    need_train = SPLIT_SIZES["train"] - len(train)
    train.extend(shuffled[:need_train])
    rest = shuffled[need_train:]
    valid = rest[: SPLIT_SIZES["valid"]]
    test = rest[SPLIT_SIZES["valid"] :]
    assert len(test) == SPLIT_SIZES["test"]

    train_entities = {e for h, _, t in train for e in (h, t)}
    assert train_entities == set(range(N_ENTITIES)), "every entity must appear in train"
    assert {r for _, r, _ in train} == set(range(N_RELATIONS))

    order = rng.permutation(len(train))
    train = [train[i] for i in order]
    return entities, relations, {"train": train, "valid": valid, "test": test}


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/nations-synth")
    out_dir.mkdir(parents=True, exist_ok=True)
    entities, relations, splits = generate(np.random.default_rng(SEED))
    for name, rows in splits.items():
        path = out_dir / f"{name}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            for h, r, t in rows:
                fh.write(f"{entities[h]}\t{relations[r]}\t{entities[t]}\n")
        print(f"{path}: {len(rows)} triples")


if __name__ == "__main__":
    main()
