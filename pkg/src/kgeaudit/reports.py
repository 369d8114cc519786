"""Serialization of audit artifacts.

Every writer here is deterministic: JSON is emitted with sorted keys, floats
use shortest round-trip repr, and nothing records timestamps or absolute
paths. Re-running the same experiment must reproduce every output file
byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError
from .graph import Query
from .voting import Ballot, Profile


def canonical(obj):
    """Recursively converts numpy scalars/arrays and NaN for JSON dumping."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return None if math.isnan(value) else value
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(canonical(payload), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_rank_csv(path, queries, eval_result) -> None:
    """Per-query gold ranks: query_id, direction, gold, rank, topK_flag."""
    rows = [
        (i, q.direction, q.gold, int(eval_result.ranks[i]), bool(eval_result.top_k[i]))
        for i, q in enumerate(queries)
    ]
    _write_csv(path, ["query_id", "direction", "gold", "rank", "topK_flag"], rows)


def write_conflict_matrix_csv(path, model_ids, matrix) -> None:
    """Wide boolean matrix: one row per model, one column per query."""
    header = ["model_id"] + [f"q{i}" for i in range(matrix.shape[1])]
    rows = [[mid] + [bool(v) for v in matrix[i]] for i, mid in enumerate(model_ids)]
    _write_csv(path, header, rows)


def read_conflict_matrix_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids = []
        rows = []
        for row in reader:
            ids.append(row[0])
            rows.append([cell == "1" for cell in row[1:]])
    matrix = np.array(rows, dtype=bool) if rows else np.zeros((0, len(header) - 1), dtype=bool)
    return ids, matrix


def write_per_query_csv(path, queries, per_query_conflict) -> None:
    """Per-query conflict flags with enough query metadata to group by
    relation or entity downstream."""
    rows = [
        (i, q.direction, q.relation, q.fixed, q.gold, bool(per_query_conflict[i]))
        for i, q in enumerate(queries)
    ]
    _write_csv(
        path,
        ["query_id", "direction", "relation", "fixed", "gold", "conflicted"],
        rows,
    )


def read_per_query_csv(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                {
                    "query_id": int(row["query_id"]),
                    "direction": row["direction"],
                    "relation": int(row["relation"]),
                    "fixed": int(row["fixed"]),
                    "gold": int(row["gold"]),
                    "conflicted": row["conflicted"] == "1",
                }
            )
    return out


def write_sweep_csv(path, key_column, rows) -> None:
    """Long-format sweep output: (key, metric, value) per row."""
    _write_csv(path, [key_column, "metric", "value"], rows)


def read_sweep_csv(path) -> list[tuple[float, str, float]]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for key, metric, value in reader:
            out.append((float(key), metric, float(value)))
    return out


def write_profiles_csv(path, profiles) -> None:
    """Ballot interchange: query_id, voter_id, entity_id, raw_score,
    position. Position is the 1-based place of the entity on that ballot
    (descending score, ascending id within ties)."""
    rows = []
    for query_id, profile in profiles:
        for ballot in profile.ballots:
            order = np.lexsort((profile.candidates, -ballot.scores))
            position = np.empty(len(order), dtype=np.int64)
            position[order] = np.arange(1, len(order) + 1)
            for j, entity in enumerate(profile.candidates):
                rows.append((query_id, ballot.voter_id, int(entity),
                             float(ballot.scores[j]), int(position[j])))
    _write_csv(path, ["query_id", "voter_id", "entity_id", "raw_score", "position"], rows)


def read_profiles_csv(path) -> list[tuple[str, Profile]]:
    """Profiles grouped by query_id, in first-appearance order. Every voter
    within a query must score the same candidate set."""
    by_query: dict[str, dict[str, dict[int, float]]] = {}
    query_order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"query_id", "voter_id", "entity_id", "raw_score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ParseError(path, 1, f"profile CSV needs columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                qid = row["query_id"]
                voter = row["voter_id"]
                entity = int(row["entity_id"])
                score = float(row["raw_score"])
            except (TypeError, ValueError) as exc:
                raise ParseError(path, lineno, str(exc)) from exc
            if qid not in by_query:
                by_query[qid] = {}
                query_order.append(qid)
            voters = by_query[qid]
            scores = voters.setdefault(voter, {})
            if entity in scores:
                raise ParseError(path, lineno, f"duplicate entity {entity} for voter {voter!r}")
            scores[entity] = score

    profiles = []
    for qid in query_order:
        voters = by_query[qid]
        candidate_sets = {frozenset(scores) for scores in voters.values()}
        if len(candidate_sets) != 1:
            raise ParseError(path, 0, f"query {qid!r}: voters disagree on the candidate set")
        candidates = np.array(sorted(candidate_sets.pop()), dtype=np.int64)
        ballots = [
            Ballot(voter_id=voter, scores=np.array([scores[c] for c in candidates]))
            for voter, scores in voters.items()
        ]
        profiles.append((qid, Profile(candidates=candidates, ballots=ballots)))
    return profiles


def write_aggregated_csv(path, results) -> None:
    """Aggregate rankings: query_id, entity_id, total, position, indifferent."""
    rows = []
    for query_id, ranking in results:
        order = ranking.order
        tied = ranking.tied_with_previous
        for pos, entity in enumerate(order, start=1):
            rows.append((query_id, int(entity), ranking.total_of(int(entity)), pos,
                         bool(tied[pos - 1])))
    _write_csv(path, ["query_id", "entity_id", "total", "position", "indifferent"], rows)


def write_answer_sets_jsonl(path, entries) -> None:
    """One line per (query, model): {query_id, model_id, tau, members}."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(canonical(entry), sort_keys=True, allow_nan=False))
            fh.write("\n")


def _report_line(rule_name, block) -> str:
    n_agg = block.get("n_aggregate")
    return (
        f"{rule_name:<10}{'-' if n_agg is None else n_agg:>5}   "
        f"{block['mean_hits']:.4f}{'':6}{block['ambiguity']:.4f}{'':6}"
        f"{block['discrepancy']:.4f}{'':8}{block['eps_deviation']:.4f}"
    )


def build_summary(audit: dict) -> str:
    """Human-readable digest of an audit payload; every number also appears
    in the machine outputs."""
    spec = audit["spec"]
    dataset = audit["dataset"]
    level = audit["level_set"]
    lines = [
        "multiplicity audit",
        f"dataset: {dataset['n_entities']} entities, {dataset['n_relations']} relations, "
        f"splits {dataset['split_sizes']['train']}/{dataset['split_sizes']['valid']}/"
        f"{dataset['split_sizes']['test']} (hash {dataset['hash'][:12]})",
        f"model: method={spec['model']['method']} dim={spec['model']['embedding_dim']} "
        f"loss={spec['model']['loss']} epochs={spec['model']['epochs']}",
        f"audit: K={spec['audit']['k']} epsilon={spec['audit']['epsilon']} "
        f"admission={spec['audit']['admission_split']} "
        f"filtered={spec['audit']['filtered']} ties={spec['audit']['tie_handling']}",
        f"backend: {audit['backend']}",
        f"baseline: Hits@{spec['audit']['k']}={audit['baseline']['test_hits']:.4f} (test), "
        f"{audit['baseline']['admission_hits']:.4f} (admission); "
        f"discrepancy bound {audit['reports']['none']['bound']:.4f} "
        f"(raw {audit['reports']['none']['bound_raw']:.4f})",
        f"level set: {level['n_admitted']} admitted of {level['attempts']} attempts "
        f"({level['rejected']} rejected)",
        "",
        f"{'rule':<10}{'n_agg':>5}   {'mean_hits':<12}{'ambiguity':<12}"
        f"{'discrepancy':<14}{'eps_dev':<8}",
    ]
    for rule_name in ("none", "majority", "borda", "range"):
        if rule_name in audit["reports"]:
            lines.append(_report_line(rule_name, audit["reports"][rule_name]))
    answers = audit.get("answers")
    if answers:
        lines.append("")
        lines.append(
            f"answer sets (tau={answers['tau']:.6g}): "
            f"set_ambiguity={answers['set_ambiguity']:.4f} "
            f"set_discrepancy={answers['set_discrepancy']:.4f} "
            f"mean_agreement={answers['mean_agreement']:.4f}"
        )
    return "\n".join(lines) + "\n"
