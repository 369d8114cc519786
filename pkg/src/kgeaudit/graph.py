"""Knowledge graph loading and indexing.

Triple files are tab-separated with three columns (head, relation, tail) per
line, one triple per line, labels as opaque strings. A dataset is three such
files (train/valid/test). Dictionaries map labels to dense integer ids in
order of first appearance while scanning train, then valid, then test; within
a line the head is seen before the tail.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidDatasetError, ParseError

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

TAIL = "tail"
HEAD = "head"


@dataclass(frozen=True)
class Triple:
    head: int
    relation: int
    tail: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.head, self.relation, self.tail)


@dataclass(frozen=True)
class Query:
    """A link-prediction query with one open slot.

    direction "tail" asks <fixed, relation, ?>, direction "head" asks
    <?, relation, fixed>. `gold` is the held-out answer entity.
    """

    direction: str
    fixed: int
    relation: int
    gold: int

    def __post_init__(self):
        if self.direction not in (TAIL, HEAD):
            raise ValueError(f"unknown query direction: {self.direction!r}")

    def triple_with(self, candidate: int) -> tuple[int, int, int]:
        """The triple obtained by filling the open slot with `candidate`."""
        if self.direction == TAIL:
            return (self.fixed, self.relation, candidate)
        return (candidate, self.relation, self.fixed)


class Vocabulary:
    """Bidirectional label <-> id map with dense ids in insertion order."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        """Returns the id for `label`, assigning the next free id if new."""
        idx = self._ids.get(label)
        if idx is None:
            idx = len(self._labels)
            self._labels.append(label)
            self._ids[label] = idx
        return idx

    def id_of(self, label: str) -> int:
        return self._ids[label]

    def label_of(self, idx: int) -> str:
        return self._labels[idx]

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __iter__(self) -> Iterator[str]:
        return iter(self._labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._labels == other._labels

    def to_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for idx, label in enumerate(self._labels):
                fh.write(f"{idx}\t{label}\n")

    @classmethod
    def from_tsv(cls, path) -> "Vocabulary":
        vocab = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\r\n").split("\t")
                if len(parts) != 2:
                    raise ParseError(path, lineno, f"expected 2 columns, got {len(parts)}")
                idx, label = parts
                if int(idx) != len(vocab._labels):
                    raise ParseError(path, lineno, f"non-contiguous id {idx}")
                vocab.add(label)
        return vocab


@dataclass
class KnowledgeGraph:
    """An indexed dataset: dictionaries, integer triple splits, and the
    known-true set used for filtered evaluation."""

    entities: Vocabulary
    relations: Vocabulary
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    dataset_hash: str
    duplicates_dropped: dict[str, int] = field(default_factory=dict)
    _known_true: set[tuple[int, int, int]] = field(default_factory=set, repr=False)
    _tails_of: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)
    _heads_of: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def known_true(self) -> set[tuple[int, int, int]]:
        return self._known_true

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split: {name!r}")
        return getattr(self, name)

    def true_answers(self, query: Query) -> np.ndarray:
        """All entities known to complete `query` (across every split),
        including the gold one. Used to build filter masks."""
        if query.direction == TAIL:
            return self._tails_of.get((query.fixed, query.relation), _EMPTY_IDS)
        return self._heads_of.get((query.relation, query.fixed), _EMPTY_IDS)


_EMPTY_IDS = np.empty(0, dtype=np.int64)


def _parse_triple_file(path) -> list[tuple[str, str, str]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 3:
                raise ParseError(path, lineno, f"expected 3 tab-separated columns, got {len(parts)}")
            if any(p == "" for p in parts):
                raise ParseError(path, lineno, "empty field")
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def _hash_files(paths: Sequence) -> str:
    digest = hashlib.sha256()
    for path in paths:
        data = Path(path).read_bytes()
        digest.update(len(data).to_bytes(8, "little"))
        digest.update(data)
    return digest.hexdigest()


def load_graph(train_path, valid_path, test_path) -> KnowledgeGraph:
    """Loads and indexes a three-split dataset.

    Duplicate lines within a split are dropped with a logged warning count.
    The same triple appearing in two splits is a hard error: split overlap
    silently corrupts filtered evaluation.
    """
    paths = {"train": train_path, "valid": valid_path, "test": test_path}
    raw = {name: _parse_triple_file(path) for name, path in paths.items()}
    if not raw["train"]:
        raise InvalidDatasetError(f"train split is empty: {train_path}")

    entities = Vocabulary()
    relations = Vocabulary()
    deduped: dict[str, list[tuple[int, int, int]]] = {}
    dropped: dict[str, int] = {}
    seen_by_split: dict[str, set[tuple[int, int, int]]] = {}
    for name in SPLITS:
        seen: set[tuple[int, int, int]] = set()
        kept: list[tuple[int, int, int]] = []
        for head, rel, tail in raw[name]:
            h = entities.add(head)
            r = relations.add(rel)
            t = entities.add(tail)
            key = (h, r, t)
            if key in seen:
                continue
            seen.add(key)
            kept.append(key)
        dropped[name] = len(raw[name]) - len(kept)
        if dropped[name]:
            logger.warning("%s: dropped %d duplicate triples", paths[name], dropped[name])
        deduped[name] = kept
        seen_by_split[name] = seen

    for a, b in (("train", "valid"), ("train", "test"), ("valid", "test")):
        overlap = seen_by_split[a] & seen_by_split[b]
        if overlap:
            h, r, t = sorted(overlap)[0]
            raise InvalidDatasetError(
                f"splits {a!r} and {b!r} share {len(overlap)} triple(s), e.g. "
                f"({entities.label_of(h)}, {relations.label_of(r)}, {entities.label_of(t)})"
            )

    arrays = {
        name: np.array(deduped[name], dtype=np.int64).reshape(-1, 3) for name in SPLITS
    }
    graph = KnowledgeGraph(
        entities=entities,
        relations=relations,
        train=arrays["train"],
        valid=arrays["valid"],
        test=arrays["test"],
        dataset_hash=_hash_files([paths[name] for name in SPLITS]),
        duplicates_dropped=dropped,
    )

    known: set[tuple[int, int, int]] = set()
    tails: dict[tuple[int, int], list[int]] = {}
    heads: dict[tuple[int, int], list[int]] = {}
    for name in SPLITS:
        for h, r, t in deduped[name]:
            known.add((h, r, t))
            tails.setdefault((h, r), []).append(t)
            heads.setdefault((r, t), []).append(h)
    graph._known_true = known
    graph._tails_of = {k: np.array(sorted(set(v)), dtype=np.int64) for k, v in tails.items()}
    graph._heads_of = {k: np.array(sorted(set(v)), dtype=np.int64) for k, v in heads.items()}
    return graph


def queries_from_split(graph: KnowledgeGraph, split: str) -> list[Query]:
    """Both query directions for every triple of `split`, in file order,
    tail query before head query."""
    queries: list[Query] = []
    for h, r, t in graph.split(split):
        queries.append(Query(TAIL, int(h), int(r), int(t)))
        queries.append(Query(HEAD, int(t), int(r), int(h)))
    return queries


def entity_frequency(graph: KnowledgeGraph) -> np.ndarray:
    """Per-entity train triple count (head and tail slots both count)."""
    counts = np.bincount(graph.train[:, 0], minlength=graph.num_entities)
    counts += np.bincount(graph.train[:, 2], minlength=graph.num_entities)
    return counts


def relation_frequency(graph: KnowledgeGraph) -> np.ndarray:
    """Per-relation train triple count."""
    return np.bincount(graph.train[:, 1], minlength=graph.num_relations)


def dump_dictionaries(graph: KnowledgeGraph, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph.entities.to_tsv(out / "entity_ids.tsv")
    graph.relations.to_tsv(out / "relation_ids.tsv")
