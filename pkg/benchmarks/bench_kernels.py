"""Timing comparison of the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 4000] [--repeat 5]
Covers the two hot loops: batched reward evaluation (the random-search inner
loop) and stump split search (one boosting round).
"""

import argparse
import time

import numpy as np

from stochint._kernels import pykern

try:
    from stochint._kernels import _ckern
except ImportError:
    _ckern = None


def time_call(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=4000, help="units")
    parser.add_argument("--directions", type=int, default=32)
    parser.add_argument("--features", type=int, default=7)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n, m, d = args.n, args.directions, args.features
    p = rng.uniform(0.05, 0.95, n)
    logit_p = np.log(p / (1 - p))
    m0 = rng.standard_normal(n)
    m1 = m0 + rng.standard_normal(n)
    lam = rng.standard_normal(n) * 0.1
    dirs = rng.standard_normal((m, n))
    x = np.ascontiguousarray(rng.standard_normal((n, d)))
    order = np.ascontiguousarray(np.argsort(x, axis=0).astype(np.int64))
    resid = rng.standard_normal(n)

    cases = {
        "phi_values (n)": lambda impl: impl.phi_values(logit_p, m0, m1, lam),
        "reward_batch (2mn)": lambda impl: impl.reward_batch(
            logit_p, m0, m1, lam, dirs, 0.05
        ),
        "best_stump (nd)": lambda impl: impl.best_stump(x, order, resid),
    }

    print(f"n={n} directions={m} features={d} (best of {args.repeat})")
    header = f"{'kernel':<22}{'python':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_py = time_call(lambda: call(pykern), args.repeat)
        if _ckern is None:
            print(f"{name:<22}{t_py * 1e3:>10.3f}ms{'n/a':>12}{'n/a':>10}")
            continue
        t_c = time_call(lambda: call(_ckern), args.repeat)
        print(f"{name:<22}{t_py * 1e3:>10.3f}ms{t_c * 1e3:>10.3f}ms"
              f"{t_py / t_c:>9.1f}x")

    if _ckern is None:
        print("\ncompiled backend unavailable; install with the extension built")
        return

    # agreement spot checks
    np.testing.assert_allclose(
        _ckern.phi_values(logit_p, m0, m1, lam),
        pykern.phi_values(logit_p, m0, m1, lam),
        rtol=1e-12,
    )
    rp_c, rm_c = _ckern.reward_batch(logit_p, m0, m1, lam, dirs, 0.05)
    rp_p, rm_p = pykern.reward_batch(logit_p, m0, m1, lam, dirs, 0.05)
    np.testing.assert_allclose(rp_c, rp_p, rtol=1e-12)
    np.testing.assert_allclose(rm_c, rm_p, rtol=1e-12)
    assert _ckern.best_stump(x, order, resid)[0] == pykern.best_stump(x, order, resid)[0]
    print("\nbackends agree to 1e-12 on all three kernels")


if __name__ == "__main__":
    main()
