#!/usr/bin/env python3
"""Smoke test for the mixdetect_py extension module.

Builds are done with plain cargo; this script locates the cdylib under
target/, copies it next to a temp dir as an importable module, and checks a
handful of known values.

    cargo build --release -p mixdetect-py
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libmixdetect_py.so",
        ROOT / "target" / "debug" / "libmixdetect_py.so",
        ROOT / "target" / "release" / "libmixdetect_py.dylib",
        ROOT / "target" / "debug" / "libmixdetect_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "extension not built; run `cargo build --release -p mixdetect-py` first"
        )
    tmp = Path(tempfile.mkdtemp(prefix="mixdetect_py_"))
    shutil.copy2(built, tmp / "mixdetect_py.so")
    sys.path.insert(0, str(tmp))
    import mixdetect_py

    return mixdetect_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    m = load_module()

    # generalized Gaussian closed forms
    normal = m.GeneralizedGaussian(2.0)
    approx(normal.density(0.0), 1.0 / math.sqrt(2.0 * math.pi), 1e-12)
    approx(normal.cdf(1.959963984540054), 0.975, 1e-9)
    approx(normal.quantile(0.975), 1.959963984540054, 1e-6)

    dexp = m.GeneralizedGaussian(1.0)
    approx(dexp.cdf(1.0), 1.0 - math.exp(-1.0) / 2.0, 1e-12)

    draws = normal.sample(20000, seed=1)
    assert len(draws) == 20000
    mean = sum(draws) / len(draws)
    assert abs(mean) < 0.05, mean
    assert draws == normal.sample(20000, seed=1), "sampling must be deterministic"

    # sign sequence and rank statistics
    assert m.sign_sequence([3.0, -1.0, 2.0]) == [1, 1, -1]
    stats = m.rank_statistics([3.0, -1.0, 2.0])
    assert stats["sign"] == 1
    assert stats["signed_rank"] == 4
    assert stats["smirnov"] == 2
    assert stats["tail_run"] == 2
    approx(stats["cusum"], math.sqrt(2.0), 1e-12)

    approx(m.t_statistic([1.0, 2.0, 3.0]), 6.0 / math.sqrt(2.0), 1e-12)

    # exact null laws
    approx(m.pvalue_sign(2, 4), 5.0 / 16.0, 0.0)
    approx(m.pvalue_runs(1, 4), 0.5, 0.0)
    approx(m.pvalue_tail_run(10), 2.0 ** -10, 0.0)
    approx(m.pvalue_smirnov(1, 3), 5.0 / 8.0, 0.0)

    # detection boundaries
    approx(m.rho_star(2.0, 0.6), 0.1, 1e-12)
    approx(m.rho_star(1.0, 0.75), 0.5, 1e-12)
    approx(m.rho_tail(2.0, 0.8), (1.0 - math.sqrt(0.2)) ** 2, 1e-12)
    approx(m.rho_long(1.0, 0.6), 0.6, 1e-15)
    approx(m.dense_threshold_s(2.0, 0.2), 0.2, 1e-15)

    # hc and lrt statistics run end to end
    x = [0.1 * (i - 20) for i in range(40)]
    hc = m.hc_statistic(x, 2.0, variant="full")
    assert math.isfinite(hc)
    lrt = m.lrt_statistic(x, 2.0, 0.1, 2.0)
    assert math.isfinite(lrt)

    assert set(m.test_names()) >= {"sign", "cusum", "tail-run", "hc", "lrt"}

    # a tiny power study, deterministic across calls
    config = json.dumps(
        {
            "gamma_null": 2.0,
            "n": 300,
            "beta": 0.2,
            "regime": "dense_s",
            "strength_grid": [0.1, 0.45],
            "reps": 40,
            "tests": ["sign", "cusum"],
            "master_seed": 5,
            "mc_reps": 200,
        }
    )
    csv = m.power_study(config)
    lines = csv.strip().split("\n")
    assert lines[0] == "strength,test,power,stderr,n,beta,regime,seed"
    assert len(lines) == 1 + 4
    assert csv == m.power_study(config), "power study must be deterministic"

    # error mapping
    try:
        m.GeneralizedGaussian(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative shape must raise ValueError")

    print("mixdetect_py smoke test: OK")


if __name__ == "__main__":
    main()
