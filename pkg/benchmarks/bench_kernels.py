"""Time the numba kernels against the numpy fallbacks on realistic workloads.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are called explicitly, so the result does not depend on
SHIFTPRESSURE_KERNELS; the backend that variable selects is printed for
reference.  numba timings exclude the first (compiling) call.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from shiftpressure import kernels
from shiftpressure.columns import build_strip, make_geometry
from shiftpressure.lattice import box_from_sides
from shiftpressure.potential import LocallyConstantPotential
from shiftpressure.subshift import Alphabet, hard_squares


def sweep_case():
    a2 = Alphabet(("0", "1"))
    pot = LocallyConstantPotential(a2, box_from_sides((2, 1)).shape, {(1, 0): 1}, 0)
    system = build_strip(make_geometry(hard_squares(), pot), 14)
    w = system.edge_w / system.geom.denom
    v0 = np.ones(system.n_states)
    label = f"transfer_sweep ({system.n_states} states, {system.n_edges} edges, 40 steps)"
    return label, lambda b: kernels.transfer_sweep(system.src, system.dst, np.exp(w), v0, 40, True, b)


def match_case():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 2, size=(400_000, 30), dtype=np.uint8)
    idx = np.array([[i, i + 1] for i in range(29)])
    sym = np.ones((29, 2), dtype=np.uint8)
    return "match_rows (400000 rows x 29 placements)", lambda b: kernels.match_rows(rows, idx, sym, b)


def histogram_case():
    nsites = 18
    anchors = np.array([[i, i + 1] for i in range(nsites - 1)])
    table = np.array([0, 1, 1, -2])
    fidx = np.array([[0, 2]])
    fsym = np.array([[1, 1]])
    return "weighted_histogram (2^18 patterns)", lambda b: kernels.weighted_histogram(
        2, nsites, anchors, table, fidx, fsym, b)


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and np.allclose(a, b, rtol=1e-12, atol=0)
    return a == b


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"SHIFTPRESSURE_KERNELS selects: {kernels.BACKEND}")
    backends = ["numpy"] + (["numba"] if kernels.numba is not None else [])
    print(f"{'kernel':<62}" + "".join(f"{b:>10}" for b in backends) + "   agree")
    for label, run in (sweep_case(), match_case(), histogram_case()):
        outs, times = {}, {}
        for b in backends:
            outs[b] = run(b)  # warm-up, and compilation for numba
            times[b] = best_time(lambda: run(b), args.repeat)
        agree = all(same(outs["numpy"], outs[b]) for b in backends)
        print(f"{label:<62}" + "".join(f"{times[b]:>9.3f}s" for b in backends) + f"   {agree}")


if __name__ == "__main__":
    main()
