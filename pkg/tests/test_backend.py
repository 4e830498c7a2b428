"""The pure-Python fallback runs the same kernel source as the compiled path."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

WORKER = r"""
import json, sys
import numpy as np
from stratboot import BACKEND, StratifiedDataset, build, default_truths
from stratboot import _kernels as K
from stratboot import bootstrap as B
from stratboot.estimation import Prepared, fit_pair
from stratboot.higher_order import RStarOptions, rstar
from stratboot.rng import derive, seed_key, word

out = {"backend": BACKEND, "words": [str(int(word(np.uint64(0), n))) for n in range(4)],
       "models": {}}
for name in ("gamma", "beta", "curved_normal", "behrens_fisher", "matched_pairs"):
    model = build(name)
    q, m = 6, 4
    truth = default_truths(name, q, 5)
    X = np.zeros((q, m)); X[:] = model.design(m)
    M = np.full(q, m, dtype=np.int64)
    Y = np.empty((q, m))
    K.simulate(model.kind, X, M, truth.psi, np.array(truth.lam), derive(seed_key(5), 0), Y)
    prep = Prepared(model, StratifiedDataset.from_arrays(Y, M))
    try:
        full, cons = fit_pair(model, prep, truth.psi)
    except Exception as exc:
        out["models"][name] = {"error": type(exc).__name__}
        continue
    reps = B.run(model, prep, truth.psi, "constrained", 4, derive(seed_key(5), 2),
                 full_fit=full, constrained_fit=cons)
    rs = rstar(model, prep, truth.psi, full, cons, RStarOptions(mc_size=400, key=7))
    out["models"][name] = {"Y": Y.tolist(), "psi_hat": full.psi, "lam": full.theta.lam.tolist(),
                           "R": [None if v != v else v for v in reps.column("R").tolist()],
                           "status": reps.status.tolist(), "rstar": rs.rstar}
json.dump(out, sys.stdout)
"""


def run_backend(no_numba):
    env = dict(os.environ)
    env.pop("STRATBOOT_NO_NUMBA", None)
    if no_numba:
        env["STRATBOOT_NO_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER], env=env, capture_output=True, text=True,
                         timeout=900)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout)


@pytest.fixture(scope="module")
def both():
    return run_backend(False), run_backend(True)


def test_backends_are_selected(both):
    compiled, python = both
    assert python["backend"] == "python"
    assert compiled["backend"] in ("numba", "python")


def test_rng_words_identical(both):
    compiled, python = both
    assert compiled["words"] == python["words"]
    assert int(python["words"][0]) == 0xE220A8397B1DCDAF


@pytest.mark.parametrize("name", ["gamma", "beta", "curved_normal", "behrens_fisher",
                                  "matched_pairs"])
def test_backends_agree(both, name):
    a, b = (side["models"][name] for side in both)
    assert a.keys() == b.keys()
    if "error" in a:
        assert a == b
        return
    assert a["Y"] == b["Y"]
    assert a["status"] == b["status"]
    assert a["psi_hat"] == pytest.approx(b["psi_hat"], rel=1e-10, abs=1e-10)
    np.testing.assert_allclose(a["lam"], b["lam"], rtol=1e-9, atol=1e-10)
    ra = np.array(a["R"], dtype=float)
    rb = np.array(b["R"], dtype=float)
    np.testing.assert_allclose(ra, rb, rtol=1e-8, atol=1e-8, equal_nan=True)
    assert a["rstar"] == pytest.approx(b["rstar"], rel=1e-8, abs=1e-8)
