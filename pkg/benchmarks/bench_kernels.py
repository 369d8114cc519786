"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the three hot kernels (triple scoring, candidate scoring, gradient
accumulation) and a short end-to-end training run under each available
backend and prints a table with the speedup of the compiled path.

    python3 benchmarks/bench_kernels.py --entities 2000 --dim 64
"""

import argparse
import statistics
import tempfile
import time
from pathlib import Path

import numpy as np

import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import synthgen  # noqa: E402  (test helper, reused for a throwaway dataset)

from kgeaudit import kernels  # noqa: E402
from kgeaudit.graph import load_graph  # noqa: E402
from kgeaudit.models import ModelConfig, init_tables  # noqa: E402
from kgeaudit.training import train  # noqa: E402

METHODS = ("transe", "distmult", "complex", "rescal", "rotate")


def _median_time(fn, repeats):
    samples = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - started)
    return statistics.median(samples)


def bench_kernels(backend_name, method, n_entities, n_relations, dim, batch, repeats):
    rng = np.random.default_rng(7)
    config = ModelConfig(method=method, embedding_dim=dim)
    ent, rel = init_tables(config, n_entities, n_relations, rng)
    h = rng.integers(0, n_entities, batch).astype(np.int64)
    r = rng.integers(0, n_relations, batch).astype(np.int64)
    t = rng.integers(0, n_entities, batch).astype(np.int64)
    coeffs = rng.normal(size=batch)
    g_ent = np.zeros_like(ent)
    g_rel = np.zeros_like(rel)

    with kernels.forced(backend_name):
        backend = kernels.active()
        score = _median_time(
            lambda: backend.score_triples(method, ent, rel, h, r, t), repeats
        )
        candidates = _median_time(
            lambda: backend.score_candidates(method, ent, rel, int(h[0]), int(r[0]), "tail"),
            repeats,
        )
        grad = _median_time(
            lambda: backend.accumulate_gradients(method, ent, rel, h, r, t, coeffs,
                                                 g_ent, g_rel),
            repeats,
        )
    return score, candidates, grad


def bench_train(backend_name, method, graph, dim, epochs):
    config = ModelConfig(method=method, embedding_dim=dim, epochs=epochs, seed=3,
                         loss="cross_entropy", optimizer="adagrad", learning_rate=0.1)
    with kernels.forced(backend_name):
        started = time.perf_counter()
        train(graph, config)
        return time.perf_counter() - started


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--entities", type=int, default=2000)
    parser.add_argument("--relations", type=int, default=20)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--batch", type=int, default=4096)
    parser.add_argument("--repeats", type=int, default=9)
    parser.add_argument("--train-epochs", type=int, default=3)
    parser.add_argument("--methods", nargs="*", default=list(METHODS))
    args = parser.parse_args()

    backends = kernels.available()
    if "c" not in backends:
        print("note: compiled backend not built; timing the pure path only")

    with tempfile.TemporaryDirectory() as tmp:
        paths = synthgen.write_dataset(Path(tmp), seed=17, n_entities=200,
                                       n_relations=8, sizes=(2000, 100, 100))
        graph = load_graph(*paths)

        header = (f"{'method':<10} {'kernel':<12} "
                  + " ".join(f"{b + ' (ms)':>12}" for b in backends)
                  + ("   speedup" if len(backends) > 1 else ""))
        print(header)
        print("-" * len(header))
        for method in args.methods:
            rows = {
                "score": [], "candidates": [], "gradients": [], "train": [],
            }
            for backend_name in backends:
                s, c, g = bench_kernels(backend_name, method, args.entities,
                                        args.relations, args.dim, args.batch,
                                        args.repeats)
                rows["score"].append(s)
                rows["candidates"].append(c)
                rows["gradients"].append(g)
                rows["train"].append(
                    bench_train(backend_name, method, graph, args.dim,
                                args.train_epochs)
                )
            for kernel_name, times in rows.items():
                cells = " ".join(f"{1e3 * v:>12.3f}" for v in times)
                speedup = ""
                if len(times) > 1:
                    by_name = dict(zip(backends, times))
                    if by_name.get("c"):
                        speedup = f"   {by_name['py'] / by_name['c']:>6.2f}x"
                print(f"{method:<10} {kernel_name:<12} {cells}{speedup}")
        print(f"\nbatch={args.batch} entities={args.entities} dim={args.dim} "
              f"repeats={args.repeats} (median); train on the 2000-triple "
              f"synthetic set, {args.train_epochs} epochs")


if __name__ == "__main__":
    main()
