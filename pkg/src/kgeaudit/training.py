"""Reproducible training of embedding models.

Randomness comes from three counter-based streams spawned from the config
seed: initialization, epoch shuffling, and negative sampling. Keeping the
streams separate means changing negatives_per_positive cannot perturb the
initialization, so seed-level comparisons stay meaningful.

Everything runs in float64 with a fixed batch size and no early stopping;
two runs with the same seed produce bitwise-identical tables.
"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import ConfigError, TrainingDivergedError
from .graph import KnowledgeGraph, Triple
from .models import EmbeddingModel, ModelConfig, init_tables

logger = logging.getLogger(__name__)

BATCH_SIZE = 128
ADAGRAD_EPS = 1e-10

# negatives that still collide with a known-true triple after this many
# redraws are kept as-is (filtered_negatives mode only)
MAX_FILTER_REDRAWS = 100


@dataclass
class TrainRun:
    model: EmbeddingModel
    epoch_losses: list[float]
    wall_clock_s: float


def derive_seed(master_seed: int, *path) -> int:
    """Maps (master_seed, named path) to a 63-bit seed.

    Audits derive every training seed this way ("baseline",),
    ("competitor", i), ("member", i, j), so a whole experiment replays from
    one master seed.
    """
    digest = hashlib.sha256()
    digest.update(str(int(master_seed)).encode())
    for part in path:
        digest.update(b"\x1f")
        digest.update(str(part).encode())
    return int.from_bytes(digest.digest()[:8], "little") >> 1


def _streams(seed: int):
    init_ss, shuffle_ss, neg_ss = np.random.SeedSequence(seed).spawn(3)
    make = lambda ss: np.random.Generator(np.random.Philox(ss))
    return make(init_ss), make(shuffle_ss), make(neg_ss)


def _replacement_draw(rng, originals, n_entities):
    """Uniform draw over entities excluding the original in each slot."""
    draws = rng.integers(0, n_entities - 1, size=originals.shape)
    return draws + (draws >= originals)


def sample_negatives(rng, triple: Triple, graph: KnowledgeGraph, k: int) -> list[Triple]:
    """k corruptions of one triple: fair coin for the slot, uniform
    replacement entity distinct from the original. Collisions with known-true
    triples are allowed (plain corruption)."""
    n = graph.num_entities
    if n < 2:
        raise ConfigError("negative sampling needs at least 2 entities")
    coins = rng.integers(0, 2, size=k)
    originals = np.where(coins == 1, triple.tail, triple.head)
    repl = _replacement_draw(rng, originals, n)
    out = []
    for slot, e in zip(coins, repl):
        if slot == 1:
            out.append(Triple(triple.head, triple.relation, int(e)))
        else:
            out.append(Triple(int(e), triple.relation, triple.tail))
    return out


def _corrupt_batch(rng, pos: np.ndarray, n_entities: int, k: int, known_true=None):
    """(B, k, 3) corruptions of a (B, 3) batch. With known_true given,
    corruptions colliding with known-true triples are redrawn in the same
    slot, up to MAX_FILTER_REDRAWS times."""
    b = pos.shape[0]
    coins = rng.integers(0, 2, size=(b, k))
    neg = np.broadcast_to(pos[:, None, :], (b, k, 3)).copy()
    originals = np.where(coins == 1, pos[:, None, 2], pos[:, None, 0])
    repl = _replacement_draw(rng, originals, n_entities)
    tail_slot = coins == 1
    neg[:, :, 2] = np.where(tail_slot, repl, neg[:, :, 2])
    neg[:, :, 0] = np.where(~tail_slot, repl, neg[:, :, 0])
    if known_true is not None:
        flat = neg.reshape(-1, 3)
        slots = tail_slot.reshape(-1)
        orig = originals.reshape(-1)
        for _ in range(MAX_FILTER_REDRAWS):
            colliding = np.array(
                [tuple(row) in known_true for row in flat], dtype=bool
            )
            if not colliding.any():
                break
            redraw = _replacement_draw(rng, orig[colliding], n_entities)
            rows = np.flatnonzero(colliding)
            flat[rows, np.where(slots[rows], 2, 0)] = redraw
        neg = flat.reshape(b, k, 3)
    return neg


def _margin_terms(s_pos, s_neg, margin):
    viol = margin - s_pos[:, None] + s_neg
    active = viol > 0
    loss = float(viol[active].sum())
    c_pos = -active.sum(axis=1).astype(np.float64)
    c_neg = active.astype(np.float64)
    return loss, c_pos, c_neg


def _cross_entropy_terms(scores, labels):
    # softplus(-y*s); gradient d/ds = -y * sigmoid(-y*s)
    z = -labels * scores
    loss = float(np.logaddexp(0.0, z).sum())
    return loss, -labels * expit(z)


class _Optimizer:
    def __init__(self, config: ModelConfig, ent_shape, rel_shape):
        self.lr = config.learning_rate
        self.kind = config.optimizer
        if self.kind == "adagrad":
            self.acc_ent = np.zeros(ent_shape)
            self.acc_rel = np.zeros(rel_shape)

    def step(self, ent, rel, g_ent, g_rel):
        if self.kind == "sgd":
            ent -= self.lr * g_ent
            rel -= self.lr * g_rel
        else:
            self.acc_ent += g_ent * g_ent
            self.acc_rel += g_rel * g_rel
            ent -= self.lr * g_ent / (np.sqrt(self.acc_ent) + ADAGRAD_EPS)
            rel -= self.lr * g_rel / (np.sqrt(self.acc_rel) + ADAGRAD_EPS)


def _wrap_phases(rel: np.ndarray) -> None:
    np.mod(rel + np.pi, 2.0 * np.pi, out=rel)
    rel -= np.pi


def train(graph: KnowledgeGraph, config: ModelConfig) -> TrainRun:
    config.validate()
    if graph.num_entities < 2:
        raise ConfigError("training needs at least 2 entities for corruption")
    started = time.perf_counter()
    backend = kernels.active()
    rng_init, rng_shuffle, rng_neg = _streams(config.seed)
    ent, rel = init_tables(config, graph.num_entities, graph.num_relations, rng_init)
    optimizer = _Optimizer(config, ent.shape, rel.shape)
    known = graph.known_true if config.filtered_negatives else None

    triples = graph.train
    n = triples.shape[0]
    k = config.negatives_per_positive
    epoch_losses: list[float] = []

    for epoch in range(config.epochs):
        perm = rng_shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, BATCH_SIZE):
            batch = triples[perm[start : start + BATCH_SIZE]]
            neg = _corrupt_batch(rng_neg, batch, graph.num_entities, k, known)
            flat_neg = neg.reshape(-1, 3)

            s_pos = backend.score_triples(
                config.method, ent, rel, batch[:, 0], batch[:, 1], batch[:, 2]
            )
            s_neg = backend.score_triples(
                config.method, ent, rel, flat_neg[:, 0], flat_neg[:, 1], flat_neg[:, 2]
            ).reshape(batch.shape[0], k)

            if config.loss == "margin":
                loss, c_pos, c_neg = _margin_terms(s_pos, s_neg, config.margin)
            else:
                scores = np.concatenate([s_pos, s_neg.reshape(-1)])
                labels = np.concatenate(
                    [np.ones(batch.shape[0]), -np.ones(flat_neg.shape[0])]
                )
                loss, coeff = _cross_entropy_terms(scores, labels)
                c_pos = coeff[: batch.shape[0]]
                c_neg = coeff[batch.shape[0] :].reshape(batch.shape[0], k)
            total += loss

            g_ent = np.zeros_like(ent)
            g_rel = np.zeros_like(rel)
            backend.accumulate_gradients(
                config.method, ent, rel,
                batch[:, 0], batch[:, 1], batch[:, 2], c_pos, g_ent, g_rel,
            )
            backend.accumulate_gradients(
                config.method, ent, rel,
                flat_neg[:, 0], flat_neg[:, 1], flat_neg[:, 2],
                np.ascontiguousarray(c_neg.reshape(-1)), g_ent, g_rel,
            )
            if config.l2_weight > 0:
                np.add.at(g_ent, batch[:, 0], 2.0 * config.l2_weight * ent[batch[:, 0]])
                np.add.at(g_rel, batch[:, 1], 2.0 * config.l2_weight * rel[batch[:, 1]])
                np.add.at(g_ent, batch[:, 2], 2.0 * config.l2_weight * ent[batch[:, 2]])

            optimizer.step(ent, rel, g_ent, g_rel)
            if config.method == "rotate":
                _wrap_phases(rel)

        if not np.isfinite(total):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch}: {total!r} "
                f"(method={config.method}, lr={config.learning_rate})"
            )
        epoch_losses.append(total)

    model = EmbeddingModel(
        config=config,
        entity_table=ent,
        relation_table=rel,
        trained_epochs=config.epochs,
        metadata={
            "dataset_hash": graph.dataset_hash,
            "final_loss": epoch_losses[-1] if epoch_losses else 0.0,
            "backend": backend.NAME,
            "wall_clock_s": time.perf_counter() - started,
        },
    )
    return TrainRun(
        model=model,
        epoch_losses=epoch_losses,
        wall_clock_s=model.metadata["wall_clock_s"],
    )


def _train_job(payload) -> TrainRun:
    graph, config = payload
    return train(graph, config)


def train_many(graph: KnowledgeGraph, configs, workers: int = 1) -> list[TrainRun]:
    """Trains several configs, optionally across processes.

    Results come back in config order regardless of worker count, and each
    training is seeded independently, so the worker count never changes the
    outcome, only the wall clock.
    """
    configs = list(configs)
    if workers <= 1 or len(configs) <= 1:
        return [train(graph, config) for config in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_job, [(graph, config) for config in configs]))
