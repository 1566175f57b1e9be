"""Benchmark the compiled rollout kernel against the numpy fallback.

Times rollout_batch on planner-shaped workloads (every candidate mode
sequence rolled out over the horizon) at several sizes, after checking
that both implementations agree on the exact same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from satmpc._kernels import backend_name, rollout_batch
from satmpc.planner import enumerate_sequences

SIZES = [
    # zones, horizon, mode blocks expanded to sequences
    (4, 16, 3),
    (16, 16, 3),
    (50, 16, 3),
    (4, 24, 3),
    (16, 32, 3),
]


def make_instance(rng, n_zones, horizon, n_modes):
    a = rng.uniform(0.75, 0.95, n_zones)
    base = -rng.uniform(1.5, 3.0, n_zones)
    b = base[:, None] * (1.0 + 0.15 * np.arange(n_modes))
    c = rng.uniform(0.005, 0.02, n_zones)
    q = rng.uniform(2.5, 4.5, n_zones)
    t0 = rng.uniform(70.0, 75.0, n_zones)
    seqs = np.array([list(s.expand(horizon)) for s in enumerate_sequences(n_modes, horizon)],
                    dtype=np.int32) - 1
    sats = np.array([52.0, 58.0, 62.0][:n_modes])
    oat = rng.uniform(72.0, 85.0, horizon)
    return dict(
        a=a, b=b, c=c, q=q, t0=t0,
        setpoint=np.full(n_zones, 72.0),
        alpha=np.full(n_zones, 0.3), omega=np.full(n_zones, 1.0),
        q_hat=rng.normal(0, 0.1, n_zones), f_hat=rng.normal(0, 0.02, n_zones),
        r_hat=rng.normal(0, 1.0, n_zones),
        seqs=seqs, sats=sats, oat=oat,
        lam=6.7e4 / (0.3 * n_zones) ** 3, mu=1.3e-3, gamma=6.7,
    )


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20, help="timing repeats (best-of)")
    args = parser.parse_args()

    print(f"default backend: {backend_name()}")
    if backend_name() != "cython":
        print("compiled kernel unavailable; timing the fallback against itself is pointless")
        return

    rng = np.random.default_rng(0)
    header = f"{'zones':>6} {'horizon':>8} {'seqs':>6} {'python':>12} {'cython':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n_zones, horizon, n_modes in SIZES:
        inst = make_instance(rng, n_zones, horizon, n_modes)
        costs_py, viol_py = rollout_batch(**inst, impl="python")
        costs_cy, viol_cy = rollout_batch(**inst, impl="cython")
        if not (np.allclose(costs_py, costs_cy, rtol=1e-12, atol=0.0)
                and np.allclose(viol_py, viol_cy, rtol=1e-12, atol=1e-15)):
            raise SystemExit("backends disagree; benchmark aborted")

        t_py = best_of(lambda: rollout_batch(**inst, impl="python"), args.repeats)
        t_cy = best_of(lambda: rollout_batch(**inst, impl="cython"), args.repeats)
        n_seqs = inst["seqs"].shape[0]
        print(f"{n_zones:>6} {horizon:>8} {n_seqs:>6} "
              f"{t_py*1e3:>10.3f}ms {t_cy*1e3:>10.3f}ms {t_py/t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
