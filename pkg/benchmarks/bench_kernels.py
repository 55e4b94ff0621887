"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Inputs match what the solver and simulator feed the kernels on the
two-point acceptance instance.
"""
import argparse
import timeit

import numpy as np

from percolate import _pykernels, kernels
from percolate.measure import compact
from percolate.signals import ProfileSpec, SignalSpec, WorldState, initial_distribution
from percolate.sim import make_rng
from percolate.wild import SolveParams, series_weights, truncation_order


def series_case(t: float, m: int):
    mu0 = compact(initial_distribution((ProfileSpec(1.0, (SignalSpec(0.75, 0.25),)),), WorldState("H")))
    p = SolveParams(1.0, t, m)
    w, _ = series_weights(p, truncation_order(p))
    kernel = mu0.weights
    for _ in range(m - 2):
        kernel = np.convolve(kernel, mu0.weights)
    base_lo = int(round(mu0.origin / mu0.step))
    args = (mu0.weights, kernel, w, base_lo, (m - 1) * base_lo, 1e-300)
    return f"series_accumulate m={m} t={t} ({w.size} terms)", lambda impl: impl.series_accumulate(*args)


def meetings_case(n: int, m: int, events: int):
    rng = make_rng(0)
    types = rng.normal(size=n)
    draws = rng.integers(np.arange(m), n, size=(events, m), dtype=np.int64)

    def call(impl):
        impl.apply_meetings(types.copy(), np.arange(n, dtype=np.int64), np.zeros(n, dtype=np.int64), draws)
    return f"apply_meetings N={n} m={m} ({events} meetings)", call


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = {"python": _pykernels}
    if "compiled" in kernels.BACKENDS:
        impls["compiled"] = kernels.BACKENDS["compiled"]
    else:
        print("compiled extension not built; timing the python backend only")

    cases = [series_case(2.0, 2), series_case(8.0, 2), series_case(2.0, 3),
             meetings_case(100_000, 2, 50_000), meetings_case(100_000, 5, 20_000)]
    print(f"{'case':<48}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for label, fn in cases:
        best = {name: min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
                for name, impl in impls.items()}
        speed = best["python"] / best["compiled"] if "compiled" in best else float("nan")
        print(f"{label:<48}" + "".join(f"{best[n]:>11.4f}s" for n in impls) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
