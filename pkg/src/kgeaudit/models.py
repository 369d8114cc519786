"""Embedding model configuration, scoring entry points, and checkpoints.

A model is two dense float64 tables plus the config that produced them.
Table widths per method (dim = config.embedding_dim):

  transe / distmult   entities dim,   relations dim
  complex             entities 2*dim, relations 2*dim (real halves first)
  rescal              entities dim,   relations dim*dim (row-major matrices)
  rotate              entities 2*dim, relations dim (phases, kept in [-pi, pi))
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, IncompatibleModelsError
from .graph import Query

METHODS = ("transe", "distmult", "complex", "rescal", "rotate")
LOSSES = ("margin", "cross_entropy")
OPTIMIZERS = ("sgd", "adagrad")

# metadata keys that vary between otherwise identical runs; excluded from
# checkpoints so same-seed retrains serialize byte-for-byte
VOLATILE_METADATA = ("wall_clock_s",)

_MAGIC = b"KGEAUD01"


@dataclass(frozen=True)
class ModelConfig:
    method: str
    embedding_dim: int
    loss: str = "margin"
    margin: float = 1.0
    negatives_per_positive: int = 4
    learning_rate: float = 0.01
    epochs: int = 100
    seed: int = 0
    optimizer: str = "adagrad"
    l2_weight: float = 0.0
    filtered_negatives: bool = False

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; expected one of {OPTIMIZERS}")
        # YAML leaves e.g. "1.0e9" (no exponent sign) as a string; catch any
        # non-numeric field before the comparisons below throw TypeError
        for name in ("embedding_dim", "negatives_per_positive", "epochs", "seed"):
            if not isinstance(getattr(self, name), int):
                raise ConfigError(f"{name} must be an integer, got {getattr(self, name)!r}")
        for name in ("margin", "learning_rate", "l2_weight"):
            if not isinstance(getattr(self, name), (int, float)):
                raise ConfigError(f"{name} must be a number, got {getattr(self, name)!r}")
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.negatives_per_positive < 1:
            raise ConfigError(
                f"negatives_per_positive must be >= 1, got {self.negatives_per_positive}"
            )
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.loss == "margin" and self.margin <= 0:
            raise ConfigError(f"margin must be > 0, got {self.margin}")
        if self.l2_weight < 0:
            raise ConfigError(f"l2_weight must be >= 0, got {self.l2_weight}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown model config fields: {sorted(extra)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


def table_shapes(config: ModelConfig, n_entities: int, n_relations: int):
    d = config.embedding_dim
    ent_width = {"transe": d, "distmult": d, "complex": 2 * d, "rescal": d, "rotate": 2 * d}
    rel_width = {"transe": d, "distmult": d, "complex": 2 * d, "rescal": d * d, "rotate": d}
    return (n_entities, ent_width[config.method]), (n_relations, rel_width[config.method])


def init_tables(config: ModelConfig, n_entities: int, n_relations: int, rng):
    """Fresh tables: entries uniform in (-0.5/sqrt(dim), +0.5/sqrt(dim)),
    except rotate relation phases, which are uniform over (-pi, pi)."""
    ent_shape, rel_shape = table_shapes(config, n_entities, n_relations)
    scale = 0.5 / np.sqrt(config.embedding_dim)
    ent = rng.uniform(-scale, scale, size=ent_shape)
    if config.method == "rotate":
        rel = rng.uniform(-np.pi, np.pi, size=rel_shape)
    else:
        rel = rng.uniform(-scale, scale, size=rel_shape)
    return np.ascontiguousarray(ent), np.ascontiguousarray(rel)


@dataclass
class EmbeddingModel:
    config: ModelConfig
    entity_table: np.ndarray
    relation_table: np.ndarray
    trained_epochs: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def num_entities(self) -> int:
        return self.entity_table.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relation_table.shape[0]

    def check_ids(self, h: int, r: int, t: int) -> None:
        if not (0 <= h < self.num_entities and 0 <= t < self.num_entities):
            raise IndexError(f"entity id out of range: ({h}, {t}) with {self.num_entities} entities")
        if not (0 <= r < self.num_relations):
            raise IndexError(f"relation id out of range: {r} with {self.num_relations} relations")


def score(model: EmbeddingModel, h: int, r: int, t: int) -> float:
    model.check_ids(h, r, t)
    out = kernels.active().score_triples(
        model.config.method,
        model.entity_table,
        model.relation_table,
        np.array([h], dtype=np.int64),
        np.array([r], dtype=np.int64),
        np.array([t], dtype=np.int64),
    )
    return float(out[0])


def score_triples(model: EmbeddingModel, h, r, t) -> np.ndarray:
    h = np.asarray(h, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    if h.size:
        model.check_ids(int(h.min()), int(r.min()), int(t.min()))
        model.check_ids(int(h.max()), int(r.max()), int(t.max()))
    return kernels.active().score_triples(
        model.config.method, model.entity_table, model.relation_table, h, r, t
    )


def score_all_candidates(model: EmbeddingModel, query: Query) -> np.ndarray:
    """Scores of every entity as the answer to `query`, indexed by entity id."""
    model.check_ids(query.fixed, query.relation, query.fixed)
    return kernels.active().score_candidates(
        model.config.method,
        model.entity_table,
        model.relation_table,
        query.fixed,
        query.relation,
        query.direction == "tail",
    )


def models_compatible(a: EmbeddingModel, b: EmbeddingModel) -> bool:
    return (
        a.num_entities == b.num_entities
        and a.metadata.get("dataset_hash") == b.metadata.get("dataset_hash")
    )


def require_compatible(models) -> None:
    models = list(models)
    for other in models[1:]:
        if not models_compatible(models[0], other):
            raise IncompatibleModelsError(
                "models disagree on entity count or dataset hash; "
                "they were not trained on the same indexed dataset"
            )


def serialize_checkpoint(model: EmbeddingModel) -> bytes:
    metadata = {k: v for k, v in model.metadata.items() if k not in VOLATILE_METADATA}
    header = {
        "format": 1,
        "config": model.config.to_dict(),
        "entity_shape": list(model.entity_table.shape),
        "relation_shape": list(model.relation_table.shape),
        "dtype": "<f8",
        "trained_epochs": model.trained_epochs,
        "metadata": metadata,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()
    parts = [
        _MAGIC,
        len(blob).to_bytes(8, "little"),
        blob,
        np.ascontiguousarray(model.entity_table, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.relation_table, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def save_checkpoint(model: EmbeddingModel, path) -> None:
    Path(path).write_bytes(serialize_checkpoint(model))


def checkpoint_hash(model: EmbeddingModel) -> str:
    return hashlib.sha256(serialize_checkpoint(model)).hexdigest()


def load_checkpoint(path, expected_dataset_hash: str | None = None) -> EmbeddingModel:
    data = Path(path).read_bytes()
    if data[: len(_MAGIC)] != _MAGIC:
        raise ConfigError(f"not a checkpoint file: {path}")
    offset = len(_MAGIC)
    header_len = int.from_bytes(data[offset : offset + 8], "little")
    offset += 8
    header = json.loads(data[offset : offset + header_len].decode())
    offset += header_len
    config = ModelConfig.from_dict(header["config"])
    ent_shape = tuple(header["entity_shape"])
    rel_shape = tuple(header["relation_shape"])
    ent_bytes = int(np.prod(ent_shape)) * 8
    ent = np.frombuffer(data[offset : offset + ent_bytes], dtype="<f8").reshape(ent_shape)
    offset += ent_bytes
    rel_bytes = int(np.prod(rel_shape)) * 8
    rel = np.frombuffer(data[offset : offset + rel_bytes], dtype="<f8").reshape(rel_shape)
    model = EmbeddingModel(
        config=config,
        entity_table=np.ascontiguousarray(ent),
        relation_table=np.ascontiguousarray(rel),
        trained_epochs=header["trained_epochs"],
        metadata=dict(header["metadata"]),
    )
    if expected_dataset_hash is not None:
        stored = model.metadata.get("dataset_hash")
        if stored != expected_dataset_hash:
            raise IncompatibleModelsError(
                f"checkpoint {path} was trained on dataset {stored}, expected {expected_dataset_hash}"
            )
    return model
