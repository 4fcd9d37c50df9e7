import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import table
from twoflux.flux import (FluxError, SwitchFunction, catalog_pair, evaluate, liu_admissible,
                          lower_convex_envelope, make_pair, max_wave_speed, polynomial_pair,
                          sample_flux, theta_eps, theta_eps_prime, upper_concave_envelope)


# -- pairs and sampling -------------------------------------------------------

def test_pair_rejects_crossing_fluxes():
    with pytest.raises(FluxError):
        polynomial_pair([0.0, 0.0, 0.5], [0.0, 0.0, 0.5])
    with pytest.raises(FluxError):
        catalog_pair("burgers_shifted", gap=-0.5)


@pytest.mark.filterwarnings("ignore:divide by zero")
def test_pair_rejects_nonfinite():
    with pytest.raises(FluxError):
        make_pair(lambda u: 1.0 / u, lambda u: u, lambda u: u,
                  lambda u: 1.0 / u + 1.0, lambda u: u, lambda u: u, (-1.0, 1.0))


def test_catalog_gap_is_measured(burgers):
    assert burgers.c0 == pytest.approx(1.0, abs=1e-12)
    assert catalog_pair("constant_gap", gap=0.25).c0 == 0.25


def test_catalog_unknown_name():
    with pytest.raises(FluxError):
        catalog_pair("no_such_flux")
    with pytest.raises(FluxError):
        catalog_pair("cubic", bogus=1)


def test_burgers_between_nodes(burgers):
    f2, _ = sample_flux(burgers, 2, (-1.0, 1.0))
    assert evaluate(f2, 0.1) == pytest.approx(0.0125, abs=1e-16)
    assert evaluate(f2, 0.25) == 0.03125
    assert evaluate(f2, 0.125) == 0.015625


def test_affine_flux_is_exact():
    pair = polynomial_pair([1.0, 2.0], [3.0, 2.0])
    for nu in (1, 3, 7):
        f_nu, _ = sample_flux(pair, nu, (-1.0, 1.0))
        u = np.linspace(-1.0, 1.0, 101)
        assert np.allclose(f_nu(u), 2.0 * u + 1.0, rtol=0, atol=1e-14)


def test_constant_gap_survives_sampling(burgers):
    for nu in (1, 4, 9):
        f_nu, g_nu = sample_flux(burgers, nu, (-2.0, 2.0))
        u = np.linspace(-2.0, 2.0, 1001)
        assert np.allclose(g_nu(u) - f_nu(u), 1.0, rtol=0, atol=1e-13)


def test_constant_flux_value(constant):
    f_nu, g_nu = sample_flux(constant, 3, (-1.0, 1.0))
    assert evaluate(g_nu, 0.3141) == 1.0
    assert evaluate(f_nu, -0.77) == 0.0


def test_evaluate_outside_window(burgers):
    f_nu, _ = sample_flux(burgers, 2, (-1.0, 1.0))
    with pytest.raises(FluxError):
        evaluate(f_nu, 1.5)


def test_sample_reports_bad_node():
    pair = make_pair(lambda u: np.where(u > 0.5, np.inf, 0.0), lambda u: 0 * u, lambda u: 0 * u,
                     lambda u: 1.0 + 0 * u, lambda u: 0 * u, lambda u: 0 * u, (-1.0, 0.4))
    with pytest.raises(FluxError, match="u=0.75"):
        sample_flux(pair, 2, (-1.0, 1.0))


@given(st.integers(1, 10), st.sampled_from(["burgers_shifted", "traffic_concave", "cubic"]))
def test_nodes_are_exact(nu, name):
    pair = catalog_pair(name, gap=0.5)
    f_nu, g_nu = sample_flux(pair, nu, (-1.5, 1.5))
    u = f_nu.nodes()
    assert np.array_equal(f_nu(u), pair.f(u))
    assert np.array_equal(g_nu(u), pair.g(u))


@given(st.integers(1, 8), st.floats(-1.5, 1.5))
def test_sampled_gap_bound(nu, u):
    pair = catalog_pair("traffic_concave", gap=0.3)
    f_nu, g_nu = sample_flux(pair, nu, (-1.5, 1.5))
    assert g_nu(u) - f_nu(u) >= pair.c0 - 1e-12


# -- envelopes ----------------------------------------------------------------

def test_convex_polygon_is_its_own_envelope(burgers):
    f1, _ = sample_flux(burgers, 1, (0.0, 1.0))
    segs = lower_convex_envelope(f1, 0.0, 1.0)
    assert [(s.u_from, s.u_to) for s in segs] == [(0.0, 0.5), (0.5, 1.0)]
    assert [s.slope for s in segs] == [0.25, 0.75]


def test_interior_vertex_above_chord():
    segs = lower_convex_envelope(table([0.0, 0.5, 0.6]), 0.0, 1.0)
    assert [(s.u_from, s.u_to) for s in segs] == [(0.0, 1.0)]
    assert segs[0].slope == pytest.approx(0.6, abs=1e-15)


def test_interior_vertex_below_chord():
    segs = lower_convex_envelope(table([0.0, -0.2, 0.1]), 0.0, 1.0)
    assert [(s.u_from, s.u_to) for s in segs] == [(0.0, 0.5), (0.5, 1.0)]
    assert [s.slope for s in segs] == pytest.approx([-0.4, 0.6], abs=1e-15)


def test_concave_envelope_of_convex_graph_is_chord(burgers):
    _, g8 = sample_flux(burgers, 8, (-1.0, 1.0))
    segs = upper_concave_envelope(g8, 1.0, 0.0)
    assert len(segs) == 1
    assert segs[0].slope == pytest.approx(0.5, abs=1e-15)


def test_concave_envelope_affine():
    pair = polynomial_pair([0.0, -0.5], [1.0, -0.5])
    _, g = sample_flux(pair, 4, (-1.0, 1.0))
    segs = upper_concave_envelope(g, 0.8, -0.6)
    assert len(segs) == 1 and segs[0].slope == pytest.approx(-0.5, abs=1e-14)


def test_concave_envelope_keeps_interior_vertex():
    segs = upper_concave_envelope(table([0.0, 0.5, 0.6]), 1.0, 0.0)
    assert [(s.u_from, s.u_to) for s in segs] == [(1.0, 0.5), (0.5, 0.0)]
    assert [s.slope for s in segs] == pytest.approx([0.2, 1.0], abs=1e-15)


def test_envelope_direction_checks(burgers_tables):
    f, g = burgers_tables
    with pytest.raises(FluxError):
        lower_convex_envelope(f, 0.5, 0.5)
    with pytest.raises(FluxError):
        upper_concave_envelope(g, 0.0, 0.5)
    with pytest.raises(FluxError):
        lower_convex_envelope(f, 0.0, 3.0)


def hull_oracle(nodes, vals, upper):
    """Vertices of the convex minorant (or concave majorant) by exhaustive chord tests."""
    pts = [(Fraction(u), Fraction(v)) for u, v in zip(nodes, vals)]
    keep = [pts[0]]
    for i in range(1, len(pts) - 1):
        ui, vi = pts[i]
        vertex = True
        for a in range(i):
            for b in range(i + 1, len(pts)):
                (ua, va), (ub, vb) = pts[a], pts[b]
                chord = va + (vb - va) * (ui - ua) / (ub - ua)
                if (vi >= chord) if not upper else (vi <= chord):
                    vertex = False
                    break
            if not vertex:
                break
        if vertex:
            keep.append(pts[i])
    keep.append(pts[-1])
    return [float(u) for u, _ in keep]


def random_polygon(rng):
    n = int(rng.integers(2, 13))
    nu = int(rng.integers(1, 5))
    j_min = int(rng.integers(-8, 9))
    if rng.random() < 0.5:
        vals = rng.uniform(-1.0, 1.0, n)
    else:
        # small dyadic values make exact collinearity common
        vals = rng.integers(-4, 5, n) / 8.0
    return table(vals, nu, j_min)


def envelope_matches_oracle(flux, rng):
    nodes = flux.nodes()
    i, j = sorted(rng.choice(nodes.size, 2, replace=False))
    lo_nodes, vals = nodes[i:j + 1], flux.values[i:j + 1]
    ok = True
    lower = lower_convex_envelope(flux, nodes[i], nodes[j])
    got = [lower[0].u_from] + [s.u_to for s in lower]
    ok &= got == hull_oracle(lo_nodes, vals, upper=False)
    upper = upper_concave_envelope(flux, nodes[j], nodes[i])
    got = [upper[0].u_from] + [s.u_to for s in upper]
    ok &= got == hull_oracle(lo_nodes, vals, upper=True)[::-1]
    return bool(ok)


@given(st.integers(0, 2**32 - 1))
def test_envelopes_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    assert envelope_matches_oracle(random_polygon(rng), rng)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_envelope_speeds_increase_and_are_admissible(seed, a, b):
    rng = np.random.default_rng(seed)
    flux = random_polygon(rng)
    lo, hi = flux.window
    u1, u2 = lo + a * (hi - lo), lo + b * (hi - lo)
    if u1 == u2:
        return
    segs = (lower_convex_envelope(flux, min(u1, u2), max(u1, u2)) if u1 < u2 else
            upper_concave_envelope(flux, u1, u2))
    scale = max(1.0, float(np.max(np.abs(flux.slopes()))))
    assert segs[0].u_from == u1 and segs[-1].u_to == u2
    for s, t in zip(segs, segs[1:]):
        assert s.u_to == t.u_from
        assert t.slope > s.slope + 1e-14 * scale
    for s in segs:
        assert liu_admissible(flux, s.u_from, s.u_to)


# -- Liu condition ------------------------------------------------------------

def test_liu_concave_admissible():
    pair = catalog_pair("traffic_concave", gap=1.0)
    assert liu_admissible(pair.f, 0.0, 1.0)
    f_nu, _ = sample_flux(pair, 4, (-1.0, 2.0))
    assert liu_admissible(f_nu, 0.0, 1.0)


def test_liu_convex_rejected(burgers):
    f1, _ = sample_flux(burgers, 1, (0.0, 1.0))
    assert not liu_admissible(f1, 0.0, 1.0)
    assert not liu_admissible(burgers.f, 0.0, 1.0)


def test_liu_affine_and_degenerate():
    f, _ = sample_flux(polynomial_pair([0.0, 3.0], [1.0, 3.0]), 3, (-1.0, 1.0))
    assert liu_admissible(f, -1.0, 1.0) and liu_admissible(f, 1.0, -1.0)
    with pytest.raises(FluxError):
        liu_admissible(f, 0.5, 0.5)


# -- switch function ----------------------------------------------------------

def test_theta_anchor_values():
    sw = SwitchFunction(1.0)
    assert theta_eps(sw, 0.0) == 0.5
    assert theta_eps(sw, 1.0) == 1.0 and theta_eps(sw, -1.0) == 0.0
    assert theta_eps(sw, 0.5) == 27.0 / 32.0
    assert theta_eps(sw, 7.0) == 1.0 and theta_eps(sw, -7.0) == 0.0


def test_theta_scaling():
    assert theta_eps(SwitchFunction(0.1), 0.05) == theta_eps(SwitchFunction(1.0), 0.5)


def test_theta_rejects_bad_eps():
    with pytest.raises(ValueError):
        SwitchFunction(0.0)


def test_theta_symmetry_samples():
    sw = SwitchFunction(0.3)
    s = np.random.default_rng(5).uniform(-1.0, 1.0, 1000)
    assert np.max(np.abs(sw.value(s) + sw.value(-s) - 1.0)) <= 1e-12


@given(st.floats(-3.0, 3.0), st.floats(0.01, 2.0))
def test_theta_derivative_properties(s, eps):
    sw = SwitchFunction(eps)
    d = theta_eps_prime(sw, s)
    assert d >= 0.0
    assert d == pytest.approx(theta_eps_prime(sw, -s), abs=1e-15)
    z = abs(s) / eps
    if z <= 0.5:
        assert d * eps >= 0.5
    if z < 1.0:
        assert d > 0.0
    h = 1e-6 * eps
    if abs(z - 1.0) > 1e-4:
        fd = (sw.value(s + h) - sw.value(s - h)) / (2 * h)
        assert fd == pytest.approx(d, rel=1e-6, abs=1e-6 / eps)


# -- wave speed ---------------------------------------------------------------

def test_max_wave_speed_examples(burgers, constant):
    assert max_wave_speed(burgers, 1.0) == pytest.approx(1.0, rel=2e-6)
    assert max_wave_speed(constant, 5.0) == 0.0
    # f = u(1-u): |f'| = |1 - 2u| peaks at u = -1
    traffic = catalog_pair("traffic_concave", gap=1.0)
    assert max_wave_speed(traffic, 1.0) == pytest.approx(3.0, rel=2e-6)
    assert max_wave_speed(traffic, 1.0) >= 3.0


def test_max_wave_speed_is_padded(burgers):
    u = np.linspace(-0.7, 0.7, 200001)
    brute = float(np.max(np.abs(burgers.df(u))))
    assert brute <= max_wave_speed(burgers, 0.7) <= brute * (1 + 2e-6)
    assert not math.isnan(max_wave_speed(burgers, 0.0))
