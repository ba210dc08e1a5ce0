"""Compiled vs pure-Python kernel timings on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each workload runs through the public API under both backends; outputs are
compared for equality before timings are reported.
"""
import argparse
import timeit

import numpy as np

from dagrelu import kernels
from dagrelu.dag import toy_dag, mlp
from dagrelu.datasets import binary_task, summing_task
from dagrelu.network import RELU, loss_and_gradient, predict
from dagrelu.nullmodel import detached_count_histogram, null_model
from dagrelu.trainer import TrainConfig, train


def workloads():
    shallow = mlp([10, 20, 1])
    deep = mlp([4, 16, 16, 16, 1])
    th_s = np.random.default_rng(0).normal(size=shallow.n_edges)
    th_d = np.random.default_rng(1).normal(size=deep.n_edges)
    bin_data = binary_task(400, 10)
    X = np.random.default_rng(2).normal(size=(2000, 4))
    toy = toy_dag()
    med = mlp([2, 3, 3, 1])  # 18 edges
    return {
        "forward 4-16-16-16-1, 2000 rows": lambda: predict(deep, RELU, th_d, X),
        "loss+grad 10-20-1, 400 rows": lambda: loss_and_gradient(shallow, RELU, th_s, bin_data,
                                                                  "logistic"),
        "train 2-4-1, 500 steps": lambda: train(mlp([2, 4, 1]), RELU, summing_task(64),
                                                TrainConfig(steps=500, log_every=500))[0],
        "exact histogram, path, 18 edges": lambda: detached_count_histogram(med, "path"),
        "exact histogram, quotient, 18 edges": lambda: detached_count_histogram(med, "quotient"),
        "monte carlo 1e5, toy graph": lambda: null_model(toy, 0.3, "mc", n=100_000).tail,
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return abs(a - b) <= 1e-12 * max(1.0, abs(a))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is kept)")
    args = ap.parse_args()
    if "compiled" not in kernels.available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    prev = kernels.backend()
    print(f"{'workload':<40}{'python s':>11}{'compiled s':>12}{'speedup':>9}  match")
    try:
        for name, fn in workloads().items():
            res, best = {}, {}
            for b in ("python", "compiled"):
                kernels.use(b)
                res[b] = fn()
                best[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            print(f"{name:<40}{best['python']:>11.4f}{best['compiled']:>12.4f}"
                  f"{best['python'] / best['compiled']:>8.1f}x  {same(res['python'], res['compiled'])}")
    finally:
        kernels.use(prev)


if __name__ == "__main__":
    main()
