"""Benchmark the two kernel backends on a desk-scale evaluation instance.

Times the SINR term accumulation and the local MMSE combiner construction
for the numpy and numba implementations and prints per-call timings plus the
speedup.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--samples 2500] [--repeats 5]

Numba must be importable (and CFPAS_BACKEND must not force numpy) for the
comparison to include the jitted path; the first jitted call compiles and is
excluded from the timings.
"""

import argparse
import time

import numpy as np

from cellfree_pas.channel import build_ensemble, resolve_pilot_powers
from cellfree_pas.association import assign_pilots_and_clusters
from cellfree_pas.config import FrameConfig, LayoutConfig
from cellfree_pas.harness import rng_for
from cellfree_pas.kernels import IMPLEMENTATIONS, group_pairs_by_ap
from cellfree_pas.propagation import build_large_scale
from cellfree_pas.receiver import _lp_mmse_base


def build_problem(samples: int):
    layout_cfg = LayoutConfig(num_aps=25, antennas_per_ap=4, num_ues=15)
    _, state = build_large_scale(layout_cfg, rng_for(1, 0, 0))
    frame = FrameConfig()
    assignment = assign_pilots_and_clusters(state.beta, frame.tau_p,
                                            "cell_free", 4)
    pilot_powers = resolve_pilot_powers(frame, 0.1, num_ues=15)
    ens = build_ensemble(state, assignment, frame, pilot_powers, samples,
                         rng_for(1, 0, 1))
    rho = np.linspace(0.01, 0.1, 15)
    base = _lp_mmse_base(ens.err_cov, assignment.served, frame.noise_power_w,
                         25, 4, rho)
    lorder, lstart = group_pairs_by_ap(ens.pair_l, 25)
    return ens, rho, base, lorder, lstart


def time_call(fn, *args, repeats: int) -> float:
    fn(*args)                      # warmup / JIT compile
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=2500)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    ens, rho, base, lorder, lstart = build_problem(args.samples)
    hhat = np.ascontiguousarray(ens.estimates)
    h = np.ascontiguousarray(ens.realizations)
    rho_pair = np.ascontiguousarray(rho[ens.pair_k])

    if "numba" not in IMPLEMENTATIONS:
        print("numba backend unavailable (not importable or disabled by "
              "CFPAS_BACKEND); only the numpy path can be timed")

    results = {}
    for name, impl in IMPLEMENTATIONS.items():
        t_combine = time_call(impl["lp_mmse_combine"], hhat, base, rho_pair,
                              ens.pair_l, lorder, lstart,
                              repeats=args.repeats)
        v = impl["lp_mmse_combine"](hhat, base, rho_pair, ens.pair_l,
                                    lorder, lstart)
        t_sinr = time_call(impl["sinr_accumulate"], v, h, ens.pair_k,
                           ens.pair_l, lorder, lstart, repeats=args.repeats)
        results[name] = (t_combine, t_sinr)

    print(f"\ninstance: L=25 APs, K=15 UEs, N=4 antennas, "
          f"S={args.samples} samples, P={len(ens.pair_k)} serving pairs")
    print(f"{'kernel':<18}" + "".join(f"{n:>12}" for n in results)
          + ("     speedup" if len(results) == 2 else ""))
    for row, label in ((0, "lp_mmse_combine"), (1, "sinr_accumulate")):
        line = f"{label:<18}"
        times = [results[n][row] for n in results]
        for t in times:
            line += f"{t * 1e3:>10.1f}ms"
        if len(times) == 2:
            line += f"{times[0] / times[1]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
