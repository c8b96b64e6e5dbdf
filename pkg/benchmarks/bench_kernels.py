"""Time the numba kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--rows 200000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from bmnet import _kernels as K
from bmnet.experiments import default_true_network, run_sweep
from bmnet.network import _flat_tables


def cases(n_rows, rng):
    net = default_true_network(0)
    radices = np.array([3, 2, 2], dtype=np.int64)
    data = np.column_stack([rng.integers(0, 3, n_rows), rng.integers(0, 2, n_rows),
                            rng.integers(0, 2, n_rows), rng.integers(0, 3, n_rows)]).astype(np.int64)
    cols = np.arange(3, dtype=np.int64)
    k = K.encode_rows_numpy(data, cols, radices)
    j = np.ascontiguousarray(data[:, 3])
    log_table = np.log(rng.dirichlet(np.ones(3), size=12))
    u = rng.random((n_rows, 4))
    flat = _flat_tables(net)
    return {
        "encode_rows": lambda f: f(data, cols, radices),
        "tabulate": lambda f: f(k, j, None, 12, 3),
        "loglik_sum": lambda f: f(log_table, k, j),
        "ancestral_sample": lambda f: f(u, *flat),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not K.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, call in cases(args.rows, rng).items():
        fast, slow = getattr(K, f"{name}_numba"), getattr(K, f"{name}_numpy")
        call(fast)  # compile
        t_np = min(timeit.repeat(lambda: call(slow), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: call(fast), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.1f}")
    net = default_true_network(0)
    run_sweep(net, 10, 10)
    t = min(timeit.repeat(lambda: run_sweep(net, 100, 2000), number=1, repeat=args.repeat)) * 1e3
    print(f"\nfull 1536-model sweep ({K.BACKEND} backend): {t:.1f} ms")


if __name__ == "__main__":
    main()
