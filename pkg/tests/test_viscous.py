import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from twoflux import diagnostics as dg
from twoflux import scenarios, viscous
from twoflux.flux import SwitchFunction, catalog_pair
from twoflux.profile import Profile
from twoflux.viscous import ViscousBlowUp, ViscousField


def reference_step(u, dt, field):
    """Direct transcription of the update with interface flux blending."""
    dx = field.dx
    sw = SwitchFunction(field.eps)
    right = np.roll(u, -1)
    th = sw.value((right - u) / dx)
    mid = 0.5 * (u + right)
    h = th * field.pair.f(mid) + (1.0 - th) * field.pair.g(mid)
    lap = right - 2.0 * u + np.roll(u, 1)
    return u - dt / dx * (h - np.roll(h, 1)) + field.delta * dt / dx ** 2 * lap


def test_cfl_example(burgers):
    # dx = 0.005, data in [-1, 1]: max gap 1 and wave speed bound 1
    u = np.linspace(-1.0, 1.0, 200)
    field = ViscousField(u, 0.1, 0.01, burgers)
    assert viscous.cfl_dt(field) == pytest.approx(0.4 * 0.005 ** 2 / 7.515, rel=1e-5)
    assert viscous.cfl_dt(field) == pytest.approx(1.33e-6, rel=1e-3)


def test_cfl_diffusion_limit(burgers):
    field = ViscousField(np.linspace(-1.0, 1.0, 200), 0.1, 1e9, burgers)
    assert viscous.cfl_dt(field) == pytest.approx(0.4 * 0.005 ** 2 / 1e9, rel=1e-8)


def test_cfl_grows_with_gap():
    u = np.linspace(0.0, 1.0, 64)
    small = ViscousField(u, 0.1, 0.0, catalog_pair("constant_gap", gap=0.5))
    large = ViscousField(u, 0.1, 0.0, catalog_pair("constant_gap", gap=2.0))
    assert viscous.cfl_dt(small) > viscous.cfl_dt(large)


def test_field_validation(burgers):
    with pytest.raises(ValueError):
        ViscousField([1.0], 0.1, 0.0, burgers)
    with pytest.raises(ValueError):
        ViscousField([1.0, 2.0], 0.0, 0.0, burgers)


def test_from_profile_exact_averages(constant):
    p = Profile.periodic([0.125, 0.625], [1.0, 0.0])
    f = ViscousField.from_profile(p, 4, 0.1, 0.0, constant)
    assert f.values.tolist() == [0.5, 1.0, 0.5, 0.0]
    with pytest.raises(ValueError):
        ViscousField.from_profile(scenarios.square_wave("line"), 4, 0.1, 0.0, constant)


def test_constant_field_unchanged(burgers):
    field = ViscousField(np.full(32, 0.3), 0.1, 0.01, burgers)
    out = viscous.step(field)
    assert np.array_equal(out.values, field.values)
    assert out.steps == 1 and out.time > 0


def test_step_matches_reference(burgers):
    rng = np.random.default_rng(4)
    field = ViscousField(rng.uniform(-1, 1, 64), 0.2, 0.01, burgers)
    dt = viscous.cfl_dt(field)
    out = viscous.step(field)
    assert out.time == dt
    assert np.allclose(out.values, reference_step(field.values, dt, field), rtol=0, atol=1e-14)


def test_increasing_data_sees_only_f(burgers):
    # slope 1 >= eps everywhere except across the wrap interface
    n = 128
    u = np.linspace(-0.5, 0.5, n, endpoint=False)
    field = ViscousField(u, 1e-3, 0.0, burgers)
    dt = viscous.cfl_dt(field)
    out = viscous.step(field).values
    mid = 0.5 * (u[1:] + u[:-1])
    h = burgers.f(mid)
    central = u[1:-1] - dt / field.dx * (h[1:] - h[:-1])
    assert np.allclose(out[1:-1], central, rtol=0, atol=1e-15)


def test_single_cell_perturbation_conserves_mean(constant):
    u = np.zeros(64)
    u[10] = 1.0
    field = ViscousField(u, 0.1, 0.01, constant)
    dt = viscous.cfl_dt(field)
    out = viscous.solve_to(field, 1000 * dt)[-1]
    assert out.steps == 1000
    assert abs(out.mean() - field.mean()) <= 1e-13 * abs(field.mean())


def test_zero_horizon_returns_field(burgers):
    field = ViscousField(np.linspace(0, 1, 16), 0.1, 0.0, burgers)
    (out,) = viscous.solve_to(field, 0.0)
    assert out.time == 0.0 and np.array_equal(out.values, field.values)
    with pytest.raises(ValueError):
        viscous.solve_to(out, -1.0)


def test_solve_to_lands_on_samples(burgers):
    field = ViscousField(np.linspace(-1, 1, 32), 0.2, 0.02, burgers)
    out = viscous.solve_to(field, 0.01, [0.002, 0.005, 0.5])
    assert [f.time for f in out] == [0.002, 0.005, 0.01]


def test_square_wave_approaches_mean(constant):
    p = scenarios.square_wave("periodic")
    field = ViscousField.from_profile(p, 128, 0.05, 0.005, constant)
    out = viscous.solve_to(field, 0.5)[-1]
    assert dg.l1_distance(out, Profile.constant(0.5)) <= 0.1


def test_monotone_condition(burgers):
    u = np.linspace(-1.0, 1.0, 100)
    # dx = 0.01 and wave speed bound 1: the threshold is delta = 0.005
    assert viscous.monotone_condition(ViscousField(u, 0.1, 0.0051, burgers))
    assert not viscous.monotone_condition(ViscousField(u, 0.1, 0.0049, burgers))


def test_blow_up_reports_steps(burgers):
    field = ViscousField(np.random.default_rng(0).uniform(-1, 1, 32), 0.1, 0.01, burgers)
    u = field.values.copy()
    lo = np.zeros_like(u)
    with pytest.raises(ViscousBlowUp) as info:
        viscous._advance(field, 1e3, 0.5, u, lo)
    assert info.value.steps > 0


fields = st.lists(st.floats(-1.0, 1.0), min_size=8, max_size=48)


@settings(max_examples=30)
@given(vals=fields, eps=st.sampled_from([0.05, 0.2, 1.0]), delta=st.sampled_from([0.0, 0.02, 0.1]))
def test_mean_conservation(vals, eps, delta, burgers):
    field = ViscousField(vals, eps, delta, burgers)
    dt = viscous.cfl_dt(field)
    out = viscous.solve_to(field, 300 * dt, [100 * dt, 200 * dt])
    m0 = field.mean()
    scale = max(abs(m0), float(np.max(np.abs(vals))))
    for f in out:
        assert abs(f.mean() - m0) <= 1e-13 * scale


@settings(max_examples=30)
@given(vals=fields, eps=st.sampled_from([0.05, 0.2, 1.0]), delta=st.sampled_from([0.02, 0.1]))
def test_maximum_principle(vals, eps, delta, burgers):
    field = ViscousField(vals, eps, delta, burgers)
    assume(viscous.monotone_condition(field))
    dt = viscous.cfl_dt(field)
    out = viscous.solve_to(field, 300 * dt, [100 * dt, 200 * dt])
    lo, hi = min(vals), max(vals)
    for f in out:
        assert lo - 1e-12 <= f.values.min() and f.values.max() <= hi + 1e-12


@settings(max_examples=30)
@given(vals=fields, bump=st.lists(st.floats(0.0, 0.5), min_size=48, max_size=48),
       eps=st.sampled_from([0.05, 0.2]), delta=st.sampled_from([0.02, 0.1]))
def test_comparison_and_contraction(vals, bump, eps, delta, burgers):
    u = np.asarray(vals)
    v = u + np.asarray(bump[:u.size])
    fu = ViscousField(u, eps, delta, burgers)
    fv = ViscousField(v, eps, delta, burgers)
    assume(viscous.monotone_condition(fu) and viscous.monotone_condition(fv))
    # one step size valid for both
    dt = min(viscous.cfl_dt(fu), viscous.cfl_dt(fv))
    T = 200 * dt
    times = [50 * dt, 100 * dt, 150 * dt]
    su = viscous.solve_to(fu, T, times, dt_max=dt)
    sv = viscous.solve_to(fv, T, times, dt_max=dt)
    d0 = dg.l1_distance(fu, fv)
    for a, b in zip(su, sv):
        assert np.all(a.values <= b.values + 1e-12)
        assert dg.l1_distance(a, b) <= d0 + 1e-8 * max(a.time, 1.0)
