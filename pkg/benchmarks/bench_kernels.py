"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--samples N] [--repeat R]

Times the raw front-end block kernel on one long stimulus, then a full
scenario (the controller calls the kernel in many short blocks, which is
where per-call overhead shows up).
"""

import argparse
import time

import numpy as np

from ppgafe import cli, config, kernels
from ppgafe.simulation import run_simulation


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_case(n):
    rng = np.random.default_rng(0)
    i_pd = 50e-6 + 1e-6 * rng.standard_normal(n)
    bufs = [np.empty(n), np.empty(n), np.empty(n), np.zeros(n, dtype=np.int8)]

    def go():
        kernels.afe_block(i_pd, 1.5, 40e-6, 30e3, 1.0, 1.65, 3.3, 0.005, 10.0, 1.65, *bufs)
    return go


def scenario_case(name):
    sim = config.to_sim_config(config.parse(cli.read_scenario_text(name)))
    return lambda: run_simulation(sim)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scenario", default="stationary")
    args = ap.parse_args()

    cases = {f"afe_block x{args.samples:,}": kernel_case(args.samples),
             f"scenario {args.scenario}": scenario_case(args.scenario)}
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in sorted(kernels.BACKENDS)))
    for label, fn in cases.items():
        row = []
        for backend in sorted(kernels.BACKENDS):
            kernels.set_backend(backend)
            fn()  # warm-up (numba compiles or loads its cache here)
            row.append(best_of(fn, args.repeat))
        print(f"{label:<28}" + "".join(f"{t * 1e3:>10.1f}ms" for t in row))


if __name__ == "__main__":
    main()
