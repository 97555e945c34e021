"""Compare the compiled and pure-Python trial kernels on the default scenario.

    python benchmarks/bench_kernels.py [--trials 400]

Both backends run the same draws; the script reports per-trial time, the
speedup, and the largest disagreement in any output column.
"""

import argparse
import time

import numpy as np

from dfrelay import _pykernels
from dfrelay.model import build_statistics, default_scenario
from dfrelay.montecarlo import STRATEGY_CODES, draw_block, realize_block
from dfrelay.strategies import psm_pick_params

try:
    from dfrelay import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--rho", type=float, default=0.05)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; nothing to compare")
        return 1

    sc = default_scenario()
    stats = build_statistics(sc)
    e, u = draw_block(stats.n_relays, 1, 0, args.trials)
    F, G, H, VG = realize_block(sc, stats, e, u)
    U = np.ascontiguousarray(u[:, 0])
    psm = psm_pick_params(stats, args.rho, sc)

    print(f"{'strategy':8s} {'python us/trial':>16s} {'cython us/trial':>16s} "
          f"{'speedup':>8s} {'max rel diff':>13s}")
    for name, code in STRATEGY_CODES.items():
        extra = ((psm.source_power, psm.threshold / sc.noise_power)
                 if name == "psm" else (0.0, 0.0))

        def run(mod):
            return mod.simulate(code, F, G, H, VG, U, sc.snr_target, args.rho,
                                *extra)

        tp, outp = _time(lambda: run(_pykernels), 1)
        tc, outc = _time(lambda: run(_ckernels), args.repeat)
        diff = 0.0
        for a, b in zip(outp, outc):
            a, b = np.asarray(a, float), np.asarray(b, float)
            both = np.isfinite(a) & np.isfinite(b)
            scale = np.maximum(np.abs(a[both]), 1e-300)
            if both.any():
                diff = max(diff, float(np.max(np.abs(a[both] - b[both]) / scale)))
        n = args.trials
        print(f"{name:8s} {1e6 * tp / n:16.1f} {1e6 * tc / n:16.2f} "
              f"{tp / tc:8.0f} {diff:13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
