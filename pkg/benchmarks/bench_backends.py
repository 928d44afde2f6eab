"""Compare the compiled kernels against the pure fallback.

Times the contact-search kernel on synthetic instances and whole simulation
runs/sweeps on the default scenario, and verifies both backends produce
identical results. Run with:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from opsim import backend
from opsim.core import RoutingMode, ScenarioConfig
from opsim.engine import run_paired_modes, run_sweep


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_contact_kernel(backends):
    print("contact search (best of 5, seconds)")
    print(f"  {'n':>6} " + " ".join(f"{b.name:>12}" for b in backends))
    rng = np.random.default_rng(1)
    for n in (150, 450, 1000, 4000):
        xs = rng.integers(0, 820, n).astype(np.int32)
        ys = rng.integers(0, 820, n).astype(np.int32)
        rs = np.maximum(1.0, rng.normal(60, 20, n))
        times = [timeit(lambda b=b: b.contact_pairs(xs, ys, rs)) for b in backends]
        ref = backends[0].contact_pairs(xs, ys, rs)
        for b in backends[1:]:
            got = b.contact_pairs(xs, ys, rs)
            assert np.array_equal(ref[0], got[0]) and np.array_equal(ref[1], got[1])
        print(f"  {n:>6} " + " ".join(f"{t:>12.5f}" for t in times))


def outcome_key(results):
    return [
        (m.id, m.delivered, m.delivered_step, tuple(sorted(m.carriers)))
        for r in results
        for m in r.outcomes
    ]


def bench_full_run(backends):
    print("\nfull paired run, default scenario, 3 modes (best of 5, seconds)")
    modes = [RoutingMode.DTN, RoutingMode.HYBRID, RoutingMode.UPN]
    keys = []
    for b in backends:
        cfg = ScenarioConfig(seed=5)
        t = timeit(lambda: run_paired_modes(cfg, modes, backend=b))
        keys.append(outcome_key(run_paired_modes(cfg, modes, backend=b)))
        print(f"  {b.name:>9}: {t:.4f}")
    for key in keys[1:]:
        assert key == keys[0], "backends disagree"
    print("  results identical across backends")


def bench_sweep(backends):
    print("\npatients sweep, 10 seeds x 5 values x 3 modes (seconds)")
    modes = [RoutingMode.DTN, RoutingMode.HYBRID, RoutingMode.UPN]
    rows = []
    for b in backends:
        import opsim.backend as backend_mod

        # run_sweep uses the import-time default; narrow benchmark scope by
        # swapping it for the duration of the call
        previous = backend_mod._ACTIVE
        backend_mod._ACTIVE = b
        try:
            t0 = time.perf_counter()
            sweep = run_sweep(ScenarioConfig(), "patients", range(10), modes)
            elapsed = time.perf_counter() - t0
        finally:
            backend_mod._ACTIVE = previous
        rows.append([r.as_csv_row() for r in sweep.rows()])
        print(f"  {b.name:>9}: {elapsed:.2f}")
    for row in rows[1:]:
        assert row == rows[0], "backends disagree"
    print("  sweep tables identical across backends")


def main():
    backends = [backend.PURE_BACKEND]
    if backend.HAVE_COMPILED:
        backends.insert(0, backend.COMPILED_BACKEND)
    else:
        print("compiled extension not available; timing the pure backend only")
    print(f"active default backend: {backend.active().name}\n")
    bench_contact_kernel(backends)
    bench_full_run(backends)
    bench_sweep(backends)


if __name__ == "__main__":
    main()
