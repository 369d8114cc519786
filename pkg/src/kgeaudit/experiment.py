"""Experiment orchestration: YAML specs in, audit artifacts out.

A spec file names a dataset, a model configuration, and audit/sweep settings.
Every training seed inside an experiment derives from the spec's master seed
via named paths, so re-running a spec reproduces every output file byte for
byte (per kernel backend).

Output directory precedence: explicit function argument (the CLI --output-dir
flag), then the KGEAUDIT_OUTPUT_DIR environment variable, then the spec.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import kernels
from .answers import answer_sets, level_set_answer_metrics, tau_from_quantile
from .errors import ConfigError
from .graph import KnowledgeGraph, entity_frequency, load_graph, queries_from_split, relation_frequency
from .models import ModelConfig, checkpoint_hash, save_checkpoint
from .multiplicity import (
    LevelSet,
    MultiplicityReport,
    build_level_set,
    evaluate_level_set,
    evaluate_with_aggregation,
    train_member_models,
)
from .ranking import TIE_HANDLING, evaluate
from .reports import (
    _write_csv,
    build_summary,
    read_conflict_matrix_csv,
    read_json,
    read_per_query_csv,
    read_profiles_csv,
    write_aggregated_csv,
    write_answer_sets_jsonl,
    write_conflict_matrix_csv,
    write_json,
    write_per_query_csv,
    write_rank_csv,
    write_sweep_csv,
)
from .stats import spearman
from .training import derive_seed, train_many
from .voting import RULES, aggregate

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "KGEAUDIT_OUTPUT_DIR"

DEFAULT_RULES = list(RULES)


@dataclass
class DatasetSpec:
    train: str
    valid: str
    test: str


@dataclass
class AuditSettings:
    epsilon: float | None = None
    k: int = 10
    n_competitors: int = 10
    max_attempts: int | None = None
    n_aggregate: int = 10
    rules: list[str] = field(default_factory=lambda: list(DEFAULT_RULES))
    admission_split: str = "valid"
    filtered: bool = True
    tie_handling: str = "optimistic"
    tau: float | None = None
    tau_quantile: float | None = None


@dataclass
class SweepSettings:
    epsilons: list[float] = field(default_factory=list)
    pool_size: int = 30
    n_aggregate_grid: list[int] = field(default_factory=list)
    rules: list[str] = field(default_factory=list)


@dataclass
class ExperimentSpec:
    dataset: DatasetSpec
    model: ModelConfig
    audit: AuditSettings = field(default_factory=AuditSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    master_seed: int = 0
    output_dir: str | None = None
    workers: int = 1


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _build_section(cls, section: dict, where: str):
    fields = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, fields, where)
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"bad {where} section: {exc}") from exc


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: spec must be a mapping")
    _check_keys(raw, {"dataset", "model", "audit", "sweep", "master_seed", "output_dir", "workers"}, str(path))

    for key in ("dataset", "model"):
        if key not in raw:
            raise ConfigError(f"{path}: missing required section {key!r}")

    dataset = _build_section(DatasetSpec, raw["dataset"], "dataset")
    base = path.parent
    dataset = DatasetSpec(
        train=str((base / dataset.train)),
        valid=str((base / dataset.valid)),
        test=str((base / dataset.test)),
    )
    model = ModelConfig.from_dict(raw["model"])
    audit = _build_section(AuditSettings, raw.get("audit", {}), "audit")
    sweep = _build_section(SweepSettings, raw.get("sweep", {}), "sweep")

    if audit.tie_handling not in TIE_HANDLING:
        raise ConfigError(f"audit.tie_handling must be one of {TIE_HANDLING}")
    if audit.admission_split not in ("train", "valid", "test"):
        raise ConfigError("audit.admission_split must be train, valid, or test")
    for rule in list(audit.rules) + list(sweep.rules):
        if rule not in RULES:
            raise ConfigError(f"unknown voting rule {rule!r}; expected one of {RULES}")
    if audit.k < 1:
        raise ConfigError("audit.k must be >= 1")
    if audit.n_competitors < 1:
        raise ConfigError("audit.n_competitors must be >= 1")
    if audit.n_aggregate < 1:
        raise ConfigError("audit.n_aggregate must be >= 1")
    if audit.tau_quantile is not None and not 0.0 <= audit.tau_quantile <= 1.0:
        raise ConfigError("audit.tau_quantile must be in [0, 1]")
    if any(e < 0 for e in sweep.epsilons):
        raise ConfigError("sweep.epsilons must be >= 0")
    if sweep.pool_size < 1:
        raise ConfigError("sweep.pool_size must be >= 1")
    if any(n < 1 for n in sweep.n_aggregate_grid):
        raise ConfigError("sweep.n_aggregate_grid entries must be >= 1")

    master_seed = raw.get("master_seed", 0)
    if not isinstance(master_seed, int) or master_seed < 0:
        raise ConfigError("master_seed must be a non-negative integer")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")

    output_dir = raw.get("output_dir")
    if output_dir is not None:
        # like dataset paths, relative to the spec file, not the process cwd
        output_dir = str(base / output_dir)

    return ExperimentSpec(
        dataset=dataset,
        model=model,
        audit=audit,
        sweep=sweep,
        master_seed=master_seed,
        output_dir=output_dir,
        workers=workers,
    )


def resolve_output_dir(spec: ExperimentSpec, override=None) -> Path:
    target = override or os.environ.get(OUTPUT_DIR_ENV) or spec.output_dir
    if not target:
        raise ConfigError(
            "no output directory: set output_dir in the spec, "
            f"pass --output-dir, or set {OUTPUT_DIR_ENV}"
        )
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(spec: ExperimentSpec) -> KnowledgeGraph:
    return load_graph(spec.dataset.train, spec.dataset.valid, spec.dataset.test)


def _spec_echo(spec: ExperimentSpec) -> dict:
    """Spec as written, minus output_dir/workers: neither changes results and
    both would break byte-level replay comparisons across output locations."""
    return {
        "dataset": dataclasses.asdict(spec.dataset),
        "model": spec.model.to_dict(),
        "audit": dataclasses.asdict(spec.audit),
        "sweep": dataclasses.asdict(spec.sweep),
        "master_seed": spec.master_seed,
    }


def _dataset_block(graph: KnowledgeGraph) -> dict:
    return {
        "hash": graph.dataset_hash,
        "n_entities": graph.num_entities,
        "n_relations": graph.num_relations,
        "split_sizes": {name: int(graph.split(name).shape[0]) for name in ("train", "valid", "test")},
        "duplicates_dropped": dict(graph.duplicates_dropped),
    }


def report_to_dict(report: MultiplicityReport) -> dict:
    return {
        "rule": report.rule,
        "k": report.k,
        "epsilon": report.epsilon,
        "admission_split": report.admission_split,
        "filtered": report.filtered,
        "tie_handling": report.tie_handling,
        "n_queries": report.n_queries,
        "n_models": report.n_models,
        "baseline_hits": report.baseline_hits,
        "model_hits": list(report.model_hits),
        "mean_hits": report.mean_hits,
        "ambiguity": report.ambiguity,
        "discrepancy": report.discrepancy,
        "bound": report.bound,
        "bound_raw": report.bound_raw,
        "admission_deltas": list(report.admission_deltas),
        "eps_deviation": report.eps_deviation,
        "model_ids": list(report.model_ids),
        "n_aggregate": report.n_aggregate,
    }


def _require_epsilon(spec: ExperimentSpec) -> float:
    if spec.audit.epsilon is None:
        raise ConfigError("audit.epsilon is required for this command")
    if spec.audit.epsilon < 0:
        raise ConfigError("audit.epsilon must be >= 0")
    return spec.audit.epsilon


def run_train(spec: ExperimentSpec, out_dir=None) -> dict:
    """Trains the baseline config alone and records its metrics."""
    out = resolve_output_dir(spec, out_dir)
    graph = _load_dataset(spec)
    config = spec.model.replace(seed=derive_seed(spec.master_seed, "baseline"))
    run = train_many(graph, [config], workers=1)[0]
    valid_q = queries_from_split(graph, "valid")
    test_q = queries_from_split(graph, "test")
    audit = spec.audit
    payload = {
        "spec": _spec_echo(spec),
        "dataset": _dataset_block(graph),
        "backend": kernels.active_name(),
        "seed": config.seed,
        "epoch_losses": run.epoch_losses,
        "checkpoint_hash": checkpoint_hash(run.model),
        "hits": {
            "valid": evaluate(run.model, graph, valid_q, audit.k, audit.filtered,
                              audit.tie_handling).hits_at_k if valid_q else None,
            "test": evaluate(run.model, graph, test_q, audit.k, audit.filtered,
                             audit.tie_handling).hits_at_k if test_q else None,
        },
    }
    save_checkpoint(run.model, out / "baseline.ckpt")
    write_json(out / "train.json", payload)
    logger.info("trained baseline in %.1fs, wrote %s", run.wall_clock_s, out)
    return payload


def _build_audit_level_set(spec: ExperimentSpec, graph: KnowledgeGraph) -> LevelSet:
    audit = spec.audit
    return build_level_set(
        graph,
        spec.model,
        epsilon=_require_epsilon(spec),
        target_size=audit.n_competitors,
        master_seed=spec.master_seed,
        max_attempts=audit.max_attempts,
        k=audit.k,
        admission_split=audit.admission_split,
        filtered=audit.filtered,
        tie_handling=audit.tie_handling,
        workers=spec.workers,
    )


def _resolve_tau(spec: ExperimentSpec, level: LevelSet, graph: KnowledgeGraph):
    if spec.audit.tau is not None:
        return spec.audit.tau
    if spec.audit.tau_quantile is not None:
        return tau_from_quantile(level.baseline, graph, spec.audit.tau_quantile,
                                 split=spec.audit.admission_split, filtered=spec.audit.filtered)
    return None


def run_audit(spec: ExperimentSpec, out_dir=None) -> dict:
    """Level set, per-rule multiplicity reports, and all on-disk artifacts."""
    out = resolve_output_dir(spec, out_dir)
    graph = _load_dataset(spec)
    test_q = queries_from_split(graph, "test")
    if not test_q:
        raise ConfigError("test split has no queries")

    level = _build_audit_level_set(spec, graph)
    reports: dict[str, MultiplicityReport] = {
        "none": evaluate_level_set(level, graph, test_q)
    }
    members = None
    if spec.audit.rules:
        members = train_member_models(level, spec.audit.n_aggregate, graph, spec.workers)
        for rule in spec.audit.rules:
            reports[rule] = evaluate_with_aggregation(
                level, rule, spec.audit.n_aggregate, graph, test_q, member_models=members
            )

    (out / "checkpoints").mkdir(exist_ok=True)
    (out / "ranks").mkdir(exist_ok=True)
    save_checkpoint(level.baseline, out / "checkpoints" / "baseline.ckpt")
    for i, model in enumerate(level.competitors, start=1):
        save_checkpoint(model, out / "checkpoints" / f"competitor_{i:02d}.ckpt")

    none_report = reports["none"]
    write_rank_csv(out / "ranks" / "baseline.csv", test_q, none_report.baseline_eval)
    for rule_name, report in reports.items():
        for model_id, ev in zip(report.model_ids, report.model_evals):
            write_rank_csv(out / "ranks" / f"{model_id}.csv", test_q, ev)
        write_conflict_matrix_csv(out / f"conflicts_{rule_name}.csv",
                                  report.model_ids, report.conflicts)
        write_per_query_csv(out / f"per_query_{rule_name}.csv", test_q,
                            report.per_query_conflict)

    tau = _resolve_tau(spec, level, graph)
    answers_block = None
    if tau is not None:
        answers_block = level_set_answer_metrics(level, graph, test_q, tau)
        entries = []
        labeled = [("baseline", level.baseline)] + [
            (f"competitor_{i:02d}", m) for i, m in enumerate(level.competitors, start=1)
        ]
        for model_id, model in labeled:
            for qid, members_set in enumerate(
                answer_sets(model, graph, test_q, tau, spec.audit.filtered)
            ):
                entries.append({
                    "query_id": qid,
                    "model_id": model_id,
                    "tau": tau,
                    "members": sorted(members_set),
                })
        write_answer_sets_jsonl(out / "answer_sets.jsonl", entries)

    payload = {
        "spec": _spec_echo(spec),
        "dataset": _dataset_block(graph),
        "backend": kernels.active_name(),
        "baseline": {
            "checkpoint_hash": checkpoint_hash(level.baseline),
            "seed": level.baseline.config.seed,
            "admission_hits": level.baseline_admission_hits,
            "test_hits": none_report.baseline_hits,
        },
        "level_set": {
            "epsilon": level.epsilon,
            "attempts": level.attempts,
            "rejected": level.rejected,
            "n_admitted": len(level.competitors),
            "competitor_seeds": [m.config.seed for m in level.competitors],
            "competitor_hashes": [checkpoint_hash(m) for m in level.competitors],
            "admission_hits": list(level.competitor_admission_hits),
            "admission_deltas": list(level.admission_deltas),
        },
        "members": {
            f"competitor_{i:02d}": [checkpoint_hash(m) for m in models]
            for i, models in (members or {}).items()
        },
        "reports": {name: report_to_dict(rep) for name, rep in reports.items()},
        "answers": answers_block,
    }
    write_json(out / "audit.json", payload)
    (out / "summary.txt").write_text(build_summary(payload), encoding="utf-8")
    logger.info("audit written to %s", out)
    return payload


def run_sweep_eps(spec: ExperimentSpec, out_dir=None) -> list[tuple]:
    """One master pool, thresholded at each requested epsilon."""
    if not spec.sweep.epsilons:
        raise ConfigError("sweep.epsilons is required for sweep-eps")
    out = resolve_output_dir(spec, out_dir)
    graph = _load_dataset(spec)
    test_q = queries_from_split(graph, "test")
    audit = spec.audit

    baseline_cfg = spec.model.replace(seed=derive_seed(spec.master_seed, "baseline"))
    baseline = train_many(graph, [baseline_cfg], workers=1)[0].model
    pool_cfgs = [
        spec.model.replace(seed=derive_seed(spec.master_seed, "competitor", i))
        for i in range(1, spec.sweep.pool_size + 1)
    ]
    pool = [r.model for r in train_many(graph, pool_cfgs, spec.workers)]

    rows = []
    admitted_counts = {}
    for eps in spec.sweep.epsilons:
        level = build_level_set(
            graph, spec.model, eps,
            target_size=spec.sweep.pool_size,
            master_seed=spec.master_seed,
            max_attempts=spec.sweep.pool_size,
            k=audit.k,
            admission_split=audit.admission_split,
            filtered=audit.filtered,
            tie_handling=audit.tie_handling,
            baseline=baseline,
            candidates=pool,
        )
        report = evaluate_level_set(level, graph, test_q)
        admitted_counts[eps] = report.n_models
        rows.append((eps, "n_admitted", report.n_models))
        rows.append((eps, "ambiguity", report.ambiguity))
        rows.append((eps, "discrepancy", report.discrepancy))
        rows.append((eps, "baseline_hits", report.baseline_hits))
        rows.append((eps, "bound", report.bound))
        if report.n_models > 0:
            rows.append((eps, "mean_hits", report.mean_hits))
        for rule in spec.sweep.rules:
            agg = evaluate_with_aggregation(level, rule, audit.n_aggregate, graph, test_q,
                                            workers=spec.workers)
            rows.append((eps, f"ambiguity_{rule}", agg.ambiguity))
            rows.append((eps, f"discrepancy_{rule}", agg.discrepancy))
            rows.append((eps, f"eps_deviation_{rule}", agg.eps_deviation))
            if agg.n_models > 0:
                rows.append((eps, f"mean_hits_{rule}", agg.mean_hits))

    write_sweep_csv(out / "sweep_eps.csv", "epsilon", rows)
    write_json(out / "sweep_eps.json", {
        "spec": _spec_echo(spec),
        "dataset": _dataset_block(graph),
        "backend": kernels.active_name(),
        "baseline_hash": checkpoint_hash(baseline),
        "pool_hashes": [checkpoint_hash(m) for m in pool],
        "admitted_per_epsilon": {repr(float(k)): v for k, v in admitted_counts.items()},
    })
    logger.info("epsilon sweep written to %s", out)
    return rows


def run_sweep_agg(spec: ExperimentSpec, out_dir=None) -> list[tuple]:
    """Varies the aggregation size over one level set and member pool."""
    if not spec.sweep.n_aggregate_grid:
        raise ConfigError("sweep.n_aggregate_grid is required for sweep-agg")
    rules = spec.sweep.rules or spec.audit.rules
    if not rules:
        raise ConfigError("sweep-agg needs at least one voting rule")
    out = resolve_output_dir(spec, out_dir)
    graph = _load_dataset(spec)
    test_q = queries_from_split(graph, "test")

    level = _build_audit_level_set(spec, graph)
    members = train_member_models(level, max(spec.sweep.n_aggregate_grid), graph, spec.workers)
    base_report = evaluate_level_set(level, graph, test_q)

    rows = []
    for n in spec.sweep.n_aggregate_grid:
        rows.append((n, "ambiguity_none", base_report.ambiguity))
        rows.append((n, "discrepancy_none", base_report.discrepancy))
        rows.append((n, "mean_hits_none", base_report.mean_hits))
        for rule in rules:
            rep = evaluate_with_aggregation(level, rule, n, graph, test_q,
                                            member_models=members)
            rows.append((n, f"ambiguity_{rule}", rep.ambiguity))
            rows.append((n, f"discrepancy_{rule}", rep.discrepancy))
            rows.append((n, f"mean_hits_{rule}", rep.mean_hits))
            rows.append((n, f"eps_deviation_{rule}", rep.eps_deviation))

    write_sweep_csv(out / "sweep_agg.csv", "n_models", rows)
    write_json(out / "sweep_agg.json", {
        "spec": _spec_echo(spec),
        "dataset": _dataset_block(graph),
        "backend": kernels.active_name(),
        "baseline_hash": checkpoint_hash(level.baseline),
        "competitor_hashes": [checkpoint_hash(m) for m in level.competitors],
        "member_hashes": {
            f"competitor_{i:02d}": [checkpoint_hash(m) for m in ms]
            for i, ms in members.items()
        },
    })
    logger.info("aggregation sweep written to %s", out)
    return rows


def _group_metrics(matrix: np.ndarray, indices: np.ndarray) -> tuple[float, float]:
    sub = matrix[:, indices]
    if sub.shape[0] == 0:
        return 0.0, 0.0
    return float(sub.any(axis=0).mean()), float(sub.mean(axis=1).max())


def run_correlate(spec: ExperimentSpec, audit_dir, out_dir=None) -> dict:
    """Spearman correlation between train-set frequency and per-group
    multiplicity, from a finished audit's conflict artifacts."""
    audit_dir = Path(audit_dir)
    per_query_path = audit_dir / "per_query_none.csv"
    matrix_path = audit_dir / "conflicts_none.csv"
    for p in (per_query_path, matrix_path):
        if not p.exists():
            raise ConfigError(f"missing audit artifact: {p}")
    target = out_dir or os.environ.get(OUTPUT_DIR_ENV) or spec.output_dir
    out = Path(target) if target else audit_dir
    out.mkdir(parents=True, exist_ok=True)

    graph = _load_dataset(spec)
    per_query = read_per_query_csv(per_query_path)
    _, matrix = read_conflict_matrix_csv(matrix_path)
    if matrix.shape[1] != len(per_query):
        raise ConfigError("conflict matrix and per-query file disagree on query count")

    frequencies = {
        "relation_frequency": relation_frequency(graph),
        "entity_frequency": entity_frequency(graph),
    }
    key_of = {
        "relation_frequency": lambda row: row["relation"],
        "entity_frequency": lambda row: row["fixed"],
    }

    group_rows = []
    rho_rows = []
    results = {}
    for variable, freqs in frequencies.items():
        keys = np.array([key_of[variable](row) for row in per_query], dtype=np.int64)
        per_item: dict[int, np.ndarray] = {
            int(k): np.flatnonzero(keys == k) for k in np.unique(keys)
        }
        by_freq: dict[int, list[int]] = {}
        for k in per_item:
            by_freq.setdefault(int(freqs[k]), []).append(k)
        groupings = {
            "per_item": {k: (int(freqs[k]), idx) for k, idx in per_item.items()},
            "per_frequency": {
                f: (f, np.concatenate([per_item[k] for k in ks]))
                for f, ks in by_freq.items()
            },
        }
        for grouping, groups in groupings.items():
            xs, amb_ys, dis_ys = [], [], []
            for key in sorted(groups):
                freq, idx = groups[key]
                amb, dis = _group_metrics(matrix, idx)
                xs.append(freq)
                amb_ys.append(amb)
                dis_ys.append(dis)
                group_rows.append((variable, grouping, key, freq, len(idx), amb, dis))
            for metric, ys in (("ambiguity", amb_ys), ("discrepancy", dis_ys)):
                if len(xs) >= 2:
                    res = spearman(np.array(xs, dtype=float), np.array(ys, dtype=float))
                else:
                    res = None
                rho_rows.append((
                    variable, grouping, metric, len(xs),
                    "" if res is None or res.degenerate else repr(res.rho),
                    "" if res is None or res.degenerate else repr(res.p_value),
                    res is None or res.degenerate,
                ))
                results[f"{variable}/{grouping}/{metric}"] = (
                    None if res is None or res.degenerate
                    else {"rho": res.rho, "p_value": res.p_value, "n": res.n}
                )

    _write_csv(out / "correlate_groups.csv",
               ["variable", "grouping", "group_key", "frequency", "n_queries",
                "ambiguity", "discrepancy"],
               group_rows)
    _write_csv(out / "correlate_rho.csv",
               ["variable", "grouping", "metric", "n_groups", "rho", "p_value", "degenerate"],
               rho_rows)
    payload = {
        "spec": _spec_echo(spec),
        "dataset": _dataset_block(graph),
        "correlations": results,
    }
    write_json(out / "correlate.json", payload)
    logger.info("correlation analysis written to %s", out)
    return payload


def run_aggregate_profiles(profiles_path, rule: str, out_path) -> int:
    """Aggregates externally produced ballots; the file-level entry point to
    the voting rules."""
    if rule not in RULES:
        raise ConfigError(f"unknown voting rule {rule!r}; expected one of {RULES}")
    profiles = read_profiles_csv(profiles_path)
    results = [(qid, aggregate(profile, rule)) for qid, profile in profiles]
    write_aggregated_csv(out_path, results)
    return len(results)


def run_report(audit_dir) -> str:
    """Rebuilds the human summary from a finished audit's machine output."""
    audit_dir = Path(audit_dir)
    payload_path = audit_dir / "audit.json"
    if not payload_path.exists():
        raise ConfigError(f"missing audit artifact: {payload_path}")
    text = build_summary(read_json(payload_path))
    (audit_dir / "summary.txt").write_text(text, encoding="utf-8")
    return text
