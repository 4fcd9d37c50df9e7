import os
import subprocess
import sys

import numpy as np
import pytest

from twoflux import backend, scenarios, semigroup, tracker, viscous

compiled = backend.load_compiled()
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

CODES = ("EV_NONE", "EV_COLLISION", "EV_VANISH", "EV_ADMISSIBILITY", "EV_MERGE",
         "ERR_WIDTH", "ERR_NONFINITE", "ERR_CAP")


@pytest.fixture(scope="module")
def pure():
    return backend.load_pure()


def test_return_code_mirrors(pure):
    for name in CODES:
        assert getattr(tracker, name) == getattr(pure, name)


def test_pure_module_is_interpreted(pure):
    assert not backend.is_compiled(pure)
    assert pure.__name__ == "twoflux._core_pure"


@needs_compiled
def test_default_backend_is_compiled():
    assert backend.is_compiled(backend.core) and backend.NAME == "compiled"


def test_env_var_forces_pure():
    env = dict(os.environ, TWOFLUX_PURE="1")
    res = subprocess.run([sys.executable, "-c", "from twoflux import backend; print(backend.NAME)"],
                         capture_output=True, text=True, env=env, check=True)
    assert res.stdout.strip() == "python"


def _run_with(core, pair, seed, topology):
    saved = tracker.core
    tracker.core = core
    try:
        p = scenarios.random_piecewise(seed, n_jumps=8, topology=topology)
        return semigroup.run(5, p, pair, 0.6, [0.2, 0.4])
    finally:
        tracker.core = saved


@needs_compiled
@pytest.mark.parametrize("seed,topology", [(0, "periodic"), (1, "periodic"), (2, "line")])
def test_tracking_backends_agree_exactly(pure, burgers, seed, topology):
    a = _run_with(compiled, burgers, seed, topology)
    b = _run_with(pure, burgers, seed, topology)
    assert a.stats == b.stats and a.stats.restarts > 0
    for pa, pb in zip(a.profiles, b.profiles):
        assert np.array_equal(pa.breakpoints, pb.breakpoints)
        assert np.array_equal(pa.values, pb.values)


@needs_compiled
def test_viscous_kernel_matches_numpy_twin(burgers):
    field = viscous.ViscousField.from_profile(scenarios.square_wave("periodic"), 64, 0.1, 0.02,
                                              burgers)
    dt = viscous.cfl_dt(field)
    fc, gc = viscous._padded(burgers.f_coef), viscous._padded(burgers.g_coef)
    u1, lo1 = field.values.copy(), np.zeros(64)
    u2, lo2 = field.values.copy(), np.zeros(64)
    assert compiled.visc_steps(u1, lo1, 300, dt, field.dx, field.eps, field.delta, fc, gc) == 300
    assert viscous._numpy_steps(u2, lo2, 300, dt, field) == 300
    assert np.max(np.abs(u1 - u2)) <= 1e-13
