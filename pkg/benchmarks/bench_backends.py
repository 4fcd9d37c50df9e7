"""Time the compiled kernels against the interpreted fallback.

    python benchmarks/bench_backends.py [--repeat N]

Runs one front-tracking problem and one viscous problem on each backend,
checks that both backends produce the same result, and prints wall times.
"""
import argparse
import time

import numpy as np

from twoflux import backend, scenarios, semigroup, tracker, viscous
from twoflux import diagnostics as dg
from twoflux.flux import catalog_pair


def tracking_case(core, pair):
    saved = tracker.core
    tracker.core = core
    try:
        p = scenarios.random_piecewise(1, n_jumps=10)
        return semigroup.run(6, p, pair, 1.0).final
    finally:
        tracker.core = saved


def viscous_case(core, pair):
    field = viscous.ViscousField.from_profile(scenarios.square_wave("periodic"), 256, 0.1, 0.01,
                                              pair)
    dt = viscous.cfl_dt(field)
    u = np.ascontiguousarray(field.values).copy()
    lo = np.zeros_like(u)
    fc, gc = viscous._padded(pair.f_coef), viscous._padded(pair.g_coef)
    core.visc_steps(u, lo, 2000, dt, field.dx, field.eps, field.delta, fc, gc)
    return u


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    compiled = backend.load_compiled()
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return
    pure = backend.load_pure()
    pair = catalog_pair("burgers_shifted")
    print(f"{'case':<12}{'compiled s':>12}{'python s':>12}{'speedup':>10}  agreement")
    for name, case, diff in (
            ("tracking", tracking_case, dg.l1_distance),
            ("viscous", viscous_case, lambda a, b: float(np.max(np.abs(a - b))))):
        tc, rc = best_of(lambda: case(compiled, pair), args.repeat)
        tp, rp = best_of(lambda: case(pure, pair), 1)
        print(f"{name:<12}{tc:12.4f}{tp:12.4f}{tp / tc:10.1f}  {diff(rc, rp):.2e}")


if __name__ == "__main__":
    main()
