"""Compare the numba and pure-Python kernel backends.

Each backend runs in its own interpreter (the backend is fixed at import by
``STRATBOOT_NO_NUMBA``). Both time the same workload, a full fit plus a
constrained bootstrap on simulated data, and report the replicate
statistics so the results can be checked for agreement.

    python3 benchmarks/bench_backends.py [--k 200] [--q 100] [--m 4]
"""
import argparse
import json
import os
import subprocess
import sys

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
from stratboot import BACKEND, StratifiedDataset, build, default_truths
from stratboot import _kernels as K
from stratboot import bootstrap as B
from stratboot.estimation import Prepared, fit_mle
from stratboot.rng import derive, seed_key

name, q, m, k = sys.argv[1], int(sys.argv[2]), int(sys.argv[3]), int(sys.argv[4])
model = build(name)
truth = default_truths(name, q, 11)
X = np.zeros((q, m)); X[:] = model.design(m)
M = np.full(q, m, dtype=np.int64)
Y = np.empty((q, m))
K.simulate(model.kind, X, M, truth.psi, np.array(truth.lam), derive(seed_key(11), 0), Y)
data = StratifiedDataset.from_arrays(Y, M)

def work():
    prep = Prepared(model, data)
    full = fit_mle(model, prep)
    reps = B.run(model, prep, truth.psi, "constrained", k, derive(seed_key(11), 2), full_fit=full)
    return full, reps

work()  # compile and warm caches
t0 = time.perf_counter()
full, reps = work()
elapsed = time.perf_counter() - t0
json.dump({"backend": BACKEND, "seconds": elapsed, "psi_hat": full.psi,
           "R": reps.column("R").tolist()}, sys.stdout)
"""


def run(backend, args):
    env = dict(os.environ)
    env.pop("STRATBOOT_NO_NUMBA", None)
    if backend == "python":
        env["STRATBOOT_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, args.model, str(args.q), str(args.m),
                          str(args.k)], env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", default="gamma")
    p.add_argument("--q", type=int, default=100)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k", type=int, default=200)
    args = p.parse_args(argv)

    fast = run("numba", args)
    slow = run("python", args)
    a, b = np.array(fast["R"]), np.array(slow["R"])
    max_diff = float(np.nanmax(np.abs(a - b)))
    same_failures = bool(np.array_equal(np.isnan(a), np.isnan(b)))
    print(f"model={args.model} q={args.q} m={args.m} K={args.k}")
    for res in (fast, slow):
        print(f"  {res['backend']:<7} {res['seconds']:9.3f} s   psi_hat={res['psi_hat']!r}")
    print(f"  speedup            {slow['seconds'] / fast['seconds']:.1f}x")
    print(f"  max |R diff|       {max_diff:.3e}   failures agree: {same_failures}")
    return 0 if max_diff < 1e-8 and same_failures else 1


if __name__ == "__main__":
    sys.exit(main())
