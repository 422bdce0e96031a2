"""Compare the compiled and pure-numpy code paths.

Each path runs in its own interpreter (the switch is read at import time):

    python benchmarks/bench_numba.py            # both paths, side by side
    python benchmarks/bench_numba.py --worker   # current path only (internal)
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeat):
    fn()  # warm-up (includes compilation on the numba path)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def worker(repeat, sweeps):
    from pdppmix import _jit, datasets
    from pdppmix.dpp import sample_projection_dpp
    from pdppmix.kernel import Domain, FourierProjectionKernel, make_palm
    from pdppmix.mixture import Dataset, Hyperparameters
    from pdppmix.samplers import run_chain

    rng = np.random.default_rng(0)
    k1 = FourierProjectionKernel(Domain([0.0], [1.0]), 5)
    k2 = FourierProjectionKernel(Domain([0.0, 0.0], [1.0, 1.0]), 2)
    Z = rng.random((4096, 2))
    palm = make_palm(k2, sample_projection_dpp(k2, rng).points[:10])
    data = Dataset(datasets.simulate("t3_1d", 300, np.random.default_rng(1)))
    hyper = Hyperparameters.default_for(1)
    cases = {
        "dpp_draw_1d_ell5 (x100)": lambda: [sample_projection_dpp(k1, rng) for _ in range(100)],
        "dpp_draw_2d_ell2": lambda: sample_projection_dpp(k2, rng),
        "palm_diagonal_4096pts": lambda: palm.diag(Z),
        f"conditional_{sweeps}_sweeps": lambda: run_chain("conditional", data, hyper, sweeps, 0, 1, snapshot_every=None),
        f"marginal_b_{sweeps}_sweeps": lambda: run_chain("marginal_b", data, hyper, sweeps, 0, 1, snapshot_every=None),
    }
    out = {name: _time(fn, repeat) for name, fn in cases.items()}
    print(json.dumps({"numba": _jit.USE_NUMBA, "seconds": out}))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--worker", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sweeps", type=int, default=50)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat, args.sweeps)
        return
    results = {}
    for flag, label in (("0", "numba"), ("1", "numpy")):
        env = dict(os.environ, PDPPMIX_DISABLE_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker", "--repeat", str(args.repeat), "--sweeps", str(args.sweeps)],
            env=env, capture_output=True, text=True, check=True,
        )
        results[label] = json.loads(proc.stdout.strip().splitlines()[-1])["seconds"]
    print(f"{'case':34s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speed-up':>9s}")
    for name in results["numba"]:
        a, b = results["numba"][name], results["numpy"][name]
        print(f"{name:34s} {a:11.4f} {b:11.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
