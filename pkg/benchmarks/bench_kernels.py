"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 5]

Times the four hot kernels at sizes representative of a large evaluation
run (tens of thousands of studies, hundreds of prompts). The similarity
matrix itself is intentionally absent: it is a BLAS matmul either way and
numba cannot beat that.
"""

import argparse
import time

import numpy as np

from obsdx.kernels import available_backends


def time_call(fn, *args, repeats):
    fn(*args)  # warmup / JIT
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)

    n_obs = 2_000_000  # observation probabilities across a big dataset
    sims_pos = rng.uniform(-1, 1, n_obs)
    sims_neg = rng.uniform(-1, 1, n_obs)

    pool_probs = rng.uniform(0, 1, 4096)

    n_scores = 200_000
    scores = rng.choice(rng.uniform(0, 1, 5000), size=n_scores)
    labels = rng.integers(0, 2, n_scores).astype(np.uint8)

    nb_x = rng.uniform(0, 1, (100_000, 8))
    nb_mean0, nb_mean1 = rng.uniform(0, 1, 8), rng.uniform(0, 1, 8)
    nb_var0, nb_var1 = rng.uniform(0.01, 0.1, 8), rng.uniform(0.01, 0.1, 8)

    cases = [
        ("contrastive_probs (2M pairs)", "contrastive_probs", (sims_pos, sims_neg, 1.0)),
        ("pool_log_mean (4096 probs)", "pool_log_mean", (pool_probs, 1e-12)),
        ("rank_auroc (200k scores, ties)", "rank_auroc", (scores, labels)),
        ("gnb_log_odds (100k x 8)", "gnb_log_odds", (nb_x, nb_mean0, nb_var0, nb_mean1, nb_var1, 0.1)),
    ]

    name_width = max(len(name) for name, _, _ in cases)
    header = f"{'kernel':<{name_width}}  " + "  ".join(f"{b:>12}" for b in backends)
    print(header)
    print("-" * len(header))
    for label, fn_name, fn_args in cases:
        cells = []
        for backend in backends.values():
            seconds = time_call(getattr(backend, fn_name), *fn_args, repeats=args.repeats)
            cells.append(f"{seconds * 1e3:9.2f} ms")
        print(f"{label:<{name_width}}  " + "  ".join(f"{c:>12}" for c in cells))


if __name__ == "__main__":
    main()
