"""Compiled vs NumPy kernels on the two samplers.

    python3 benchmarks/bench_kernels.py [--n 101] [--reps 300]

Both backends consume the same streams, so their outputs are compared for
bit-identity before timings are printed.
"""

import argparse
import time

import numpy as np

from maxstab import kernels
from maxstab.model import ModelSpec, RngStream, make_grid_1d
from maxstab.simulate import ExtremalFunctions, threshold_stopping
from maxstab.spectral import SumNormSampler, increments_for


def _time_dm(sampler, reps, backend):
    t0 = time.perf_counter()
    out = [threshold_stopping(sampler, sampler.n, RngStream(1, r), kernels=backend)[0].values
           for r in range(reps)]
    return time.perf_counter() - t0, np.array(out)


def _time_ef(ef, reps):
    t0 = time.perf_counter()
    out = [ef.run(RngStream(2, r)).sample.values for r in range(reps)]
    return time.perf_counter() - t0, np.array(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=101)
    ap.add_argument("--reps", type=int, default=300)
    args = ap.parse_args()

    grid = make_grid_1d(-1, 1, args.n)
    model = ModelSpec.brown_resnick(1.0, v=1.0)
    fam = increments_for(grid, model)
    dm = SumNormSampler(grid, model, fam)
    names = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    res = {}
    for name in names:
        be = kernels.get_backend(name)
        t_dm, z_dm = _time_dm(dm, args.reps, be)
        t_ef, z_ef = _time_ef(ExtremalFunctions(fam, kernels=be), args.reps)
        res[name] = (t_dm, t_ef, z_dm, z_ef)
        print(f"{name:7s} DM {1e3 * t_dm / args.reps:8.3f} ms/rep   EF {1e3 * t_ef / args.reps:8.3f} ms/rep")
    if len(names) == 2:
        same = all(np.array_equal(res["python"][i], res["cython"][i]) for i in (2, 3))
        print(f"bit-identical outputs: {same}")
        print(f"speed-up DM x{res['python'][0] / res['cython'][0]:.2f}   EF x{res['python'][1] / res['cython'][1]:.2f}")
    else:
        print("compiled extension not built; only the NumPy backend was timed")


if __name__ == "__main__":
    main()
