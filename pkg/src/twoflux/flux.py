"""Flux pairs, their polygonal samples, envelopes and the smooth switch.

A two-flux law is driven by a pair ``f < g``.  Increasing parts of the
solution are transported with ``f`` and decreasing parts with ``g``.  Front
tracking replaces both fluxes by their piecewise affine interpolants on the
dyadic grid ``2**-nu * Z``; everything downstream works on those tables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from . import backend

_core = backend.core

# Dense sample size used when a check runs over a continuous state range.
DENSE_SAMPLES = 20001


class FluxError(ValueError):
    """Raised for invalid flux data or out-of-window evaluation."""


class _Poly:
    """Picklable polynomial callable (ascending coefficients)."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        self.coef = np.asarray(coef, dtype=float)

    def __call__(self, u):
        return P.polyval(u, self.coef)

    def __reduce__(self):
        return (_Poly, (self.coef.tolist(),))


def _poly_callables(coef):
    coef = np.asarray(coef, dtype=float)
    d1 = P.polyder(coef) if coef.size > 1 else np.zeros(1)
    d2 = P.polyder(d1) if d1.size > 1 else np.zeros(1)
    return _Poly(coef), _Poly(d1), _Poly(d2)


@dataclass(frozen=True)
class SmoothFluxPair:
    """A flux pair with analytic first and second derivatives.

    ``c0`` is the uniform gap ``min(g - f)`` over ``u_range``.  Pairs built
    from polynomial coefficients keep them in ``f_coef``/``g_coef`` so the
    compiled viscous kernel can evaluate them without Python callbacks.
    """

    f: Callable
    df: Callable
    d2f: Callable
    g: Callable
    dg: Callable
    d2g: Callable
    c0: float
    u_range: tuple[float, float]
    name: str = "custom"
    f_coef: tuple[float, ...] | None = None
    g_coef: tuple[float, ...] | None = None
    params: dict = field(default_factory=dict, compare=False)

    def gap(self, u):
        return self.g(u) - self.f(u)

    def max_gap(self, lo: float, hi: float) -> float:
        u = np.linspace(lo, hi, DENSE_SAMPLES)
        return float(np.max(self.gap(u)))


def make_pair(f, df, d2f, g, dg, d2g, u_range, *, name="custom", f_coef=None,
              g_coef=None, params=None) -> SmoothFluxPair:
    """Build a pair and measure its gap on a dense grid, rejecting ``f >= g``."""
    lo, hi = map(float, u_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise FluxError(f"invalid u_range {u_range!r}")
    u = np.linspace(lo, hi, DENSE_SAMPLES)
    fu = np.broadcast_to(np.asarray(f(u), dtype=float), u.shape)
    gu = np.broadcast_to(np.asarray(g(u), dtype=float), u.shape)
    if not (np.all(np.isfinite(fu)) and np.all(np.isfinite(gu))):
        raise FluxError(f"flux '{name}' is not finite on {u_range!r}")
    c0 = float(np.min(gu - fu))
    if not c0 > 0.0:
        raise FluxError(f"flux '{name}' violates f < g (min gap {c0:g})")
    return SmoothFluxPair(f, df, d2f, g, dg, d2g, c0, (lo, hi), name,
                          None if f_coef is None else tuple(map(float, f_coef)),
                          None if g_coef is None else tuple(map(float, g_coef)),
                          dict(params or {}))


def polynomial_pair(f_coef: Sequence[float], g_coef: Sequence[float],
                    u_range=(-2.0, 2.0), *, name="polynomial", params=None) -> SmoothFluxPair:
    """Pair from ascending polynomial coefficients, e.g. ``[0, 0, 0.5]`` is u**2/2."""
    if len(f_coef) == 0 or len(g_coef) == 0:
        raise FluxError("empty coefficient list")
    f, df, d2f = _poly_callables(f_coef)
    g, dg, d2g = _poly_callables(g_coef)
    return make_pair(f, df, d2f, g, dg, d2g, u_range, name=name,
                     f_coef=f_coef, g_coef=g_coef, params=params)


def _shifted(coef, gap):
    out = list(map(float, coef))
    out[0] += gap
    return out


def catalog_pair(name: str, *, gap: float = 1.0, u_range=(-2.0, 2.0), **params) -> SmoothFluxPair:
    """Named flux pairs used by configs.

    burgers_shifted  f = u^2/2,    g = f + gap
    traffic_concave  f = u(1-u),   g = f + gap
    constant_gap     f = low,      g = low + gap
    cubic            f = u^3/3,    g = f + gap
    polynomial       explicit ``f`` and ``g`` coefficient lists
    """
    gap = float(gap)
    rec = dict(params, gap=gap)
    if name == "burgers_shifted":
        fc = [0.0, 0.0, 0.5]
    elif name == "traffic_concave":
        fc = [0.0, 1.0, -1.0]
    elif name == "constant_gap":
        fc = [float(params.pop("low", 0.0))]
    elif name == "cubic":
        fc = [0.0, 0.0, 0.0, 1.0 / 3.0]
    elif name == "polynomial":
        try:
            fc, gc = params.pop("f"), params.pop("g")
        except KeyError as exc:
            raise FluxError("polynomial flux needs 'f' and 'g' coefficient lists") from exc
        if params:
            raise FluxError(f"unknown flux parameters {sorted(params)}")
        return polynomial_pair(fc, gc, u_range, name=name, params=rec)
    else:
        raise FluxError(f"unknown flux '{name}'")
    if params:
        raise FluxError(f"unknown flux parameters {sorted(params)}")
    return polynomial_pair(fc, _shifted(fc, gap), u_range, name=name, params=rec)


FLUX_CATALOG = ("burgers_shifted", "traffic_concave", "constant_gap", "cubic", "polynomial")


@dataclass(frozen=True, eq=False)
class PiecewiseAffineFlux:
    """Affine interpolant of a flux on the nodes ``u_j = j * 2**-nu``.

    ``values[k]`` is the flux at node ``j_min + k``.  Evaluation uses the
    convex combination ``(1-t) v_k + t v_{k+1}`` so nodes are reproduced
    exactly.
    """

    nu: int
    j_min: int
    j_max: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.j_max - self.j_min + 1,) or vals.size < 2:
            raise FluxError("table length does not match the grid window")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def h(self) -> float:
        return 2.0 ** -self.nu

    @property
    def window(self) -> tuple[float, float]:
        return self.j_min * self.h, self.j_max * self.h

    def nodes(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1) * self.h

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) * 2.0 ** self.nu

    def __call__(self, u):
        return evaluate(self, u)


def sample_flux(pair: SmoothFluxPair, nu: int, window=None):
    """Interpolate ``f`` and ``g`` on the ``2**-nu`` grid.

    ``window`` defaults to ``pair.u_range`` and is widened outward to grid
    nodes.  Returns ``(f_nu, g_nu)``.
    """
    nu = int(nu)
    if nu < 1:
        raise FluxError("nu must be >= 1")
    lo, hi = window if window is not None else pair.u_range
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise FluxError("sampling window must be finite")
    scale = 2.0 ** nu
    j_min = int(np.floor(lo * scale))
    j_max = int(np.ceil(hi * scale))
    if j_max <= j_min:
        j_max = j_min + 1
    u = np.arange(j_min, j_max + 1) / scale
    out = []
    for fn in (pair.f, pair.g):
        vals = np.broadcast_to(np.asarray(fn(u), dtype=float), u.shape).copy()
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise FluxError(f"non-finite flux value at node u={float(u[bad[0]])!r}")
        out.append(PiecewiseAffineFlux(nu, j_min, j_max, vals))
    return out[0], out[1]


def evaluate(flux: PiecewiseAffineFlux, u):
    """Affine interpolation of the table; raises on states outside the window."""
    arr = np.asarray(u, dtype=float)
    scale = 2.0 ** flux.nu
    s = arr * scale
    if np.any(~np.isfinite(s)) or np.any(s < flux.j_min) or np.any(s > flux.j_max):
        raise FluxError(f"state outside flux window {flux.window}")
    k = np.clip(np.floor(s).astype(np.int64) - flux.j_min, 0, flux.values.size - 2)
    t = s - (k + flux.j_min)
    v = flux.values
    out = (1.0 - t) * v[k] + t * v[k + 1]
    return float(out) if out.ndim == 0 else out


# -- envelopes ------------------------------------------------------------

class Segment(NamedTuple):
    u_from: float
    u_to: float
    slope: float


def slope_tolerance(flux: PiecewiseAffineFlux) -> float:
    """Slope resolution used to decide collinearity in envelopes."""
    sl = flux.slopes()
    return 1e-12 * max(1.0, float(np.max(np.abs(sl))) if sl.size else 1.0)


def _check_window(flux, *us):
    lo, hi = flux.window
    for u in us:
        if not (lo <= u <= hi):
            raise FluxError(f"state {u!r} outside flux window {flux.window}")


def _envelope(flux, u_l, u_r, upper, sigma):
    _check_window(flux, u_l, u_r)
    nmax = flux.values.size + 2
    out = np.empty(nmax)
    m = _core.envelope_states(flux.values, flux.j_min, float(2.0 ** flux.nu),
                              float(u_l), float(u_r), bool(upper), float(sigma),
                              slope_tolerance(flux), out)
    scale = float(2.0 ** flux.nu)
    return [Segment(float(out[i]), float(out[i + 1]),
                    _core.chord(flux.values, flux.j_min, scale, out[i], out[i + 1]))
            for i in range(m - 1)]


def lower_convex_envelope(flux: PiecewiseAffineFlux, u_l: float, u_r: float,
                          sigma: float = 0.0) -> list[Segment]:
    """Convex minorant of the flux graph on ``[u_l, u_r]`` as chained segments.

    Breakpoints are ``u_l``, ``u_r`` and the grid nodes strictly between
    (nodes closer than ``sigma`` to an endpoint are skipped).  Slopes
    increase strictly along the chain.
    """
    if not u_l < u_r:
        raise FluxError("lower envelope needs u_l < u_r")
    return _envelope(flux, u_l, u_r, False, sigma)


def upper_concave_envelope(flux: PiecewiseAffineFlux, u_l: float, u_r: float,
                           sigma: float = 0.0) -> list[Segment]:
    """Concave majorant on ``[u_r, u_l]``, listed from ``u_l`` down to ``u_r``.

    In that order consecutive slopes (front speeds) increase, which is the
    left-to-right spatial order of the fronts of a downward jump.
    """
    if not u_l > u_r:
        raise FluxError("upper envelope needs u_l > u_r")
    return _envelope(flux, u_l, u_r, True, sigma)


def liu_admissible(flux, u_minus: float, u_plus: float, tol: float | None = None) -> bool:
    """Whether the jump ``u_minus -> u_plus`` satisfies Liu's chord condition.

    The shock speed must not exceed the chord slope from ``u_minus`` to any
    intermediate state.  For a polygonal flux the grid nodes strictly between
    are checked; for a callable, a dense sample.  Equality is admissible and
    ``tol`` absorbs rounding (default: a slope resolution of the flux).
    """
    if u_minus == u_plus:
        raise FluxError("Liu condition is undefined for a zero jump")
    lo, hi = min(u_minus, u_plus), max(u_minus, u_plus)
    if isinstance(flux, PiecewiseAffineFlux):
        h = flux.h
        j0 = int(np.floor(lo / h)) + 1
        j1 = int(np.ceil(hi / h)) - 1
        mids = np.arange(j0, j1 + 1) * h
        mids = mids[(mids > lo) & (mids < hi)]
        fn = flux
        if tol is None:
            tol = slope_tolerance(flux)
    else:
        mids = np.linspace(lo, hi, DENSE_SAMPLES)[1:-1]
        fn = flux
        if tol is None:
            tol = 1e-12
    if mids.size == 0:
        return True
    f_m = float(np.asarray(fn(u_minus)))
    speed = (float(np.asarray(fn(u_plus))) - f_m) / (u_plus - u_minus)
    chords = (np.asarray(fn(mids), dtype=float) - f_m) / (mids - u_minus)
    return bool(np.all(speed <= chords + tol))


# -- switch function ------------------------------------------------------

@dataclass(frozen=True)
class SwitchFunction:
    """Smooth Heaviside replacement ``theta_eps(s) = theta(s / eps)``.

    ``theta(s) = 1/2 + (3/4)(s - s**3/3)`` on ``[-1, 1]``, clamped to 0 and 1
    outside; its derivative ``(3/4)(1 - s**2)`` is even and vanishes at the
    ends, so ``theta`` is C^1.
    """

    epsilon: float = 1.0

    MAX_SLOPE = 0.75

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def value(self, s):
        z = np.clip(np.asarray(s, dtype=float) / self.epsilon, -1.0, 1.0)
        out = 0.5 + 0.75 * (z - z ** 3 / 3.0)
        return float(out) if out.ndim == 0 else out

    def prime(self, s):
        z = np.asarray(s, dtype=float) / self.epsilon
        out = np.where(np.abs(z) < 1.0, 0.75 * (1.0 - z * z), 0.0) / self.epsilon
        return float(out) if out.ndim == 0 else out


def theta_eps(sw: SwitchFunction, s):
    return sw.value(s)


def theta_eps_prime(sw: SwitchFunction, s):
    return sw.prime(s)


def max_wave_speed(pair: SmoothFluxPair, m: float) -> float:
    """Bound on ``|f'|, |g'|`` over ``|u| <= m`` from a dense sample, padded by 1e-6."""
    if m < 0:
        raise ValueError("m must be non-negative")
    u = np.linspace(-m, m, DENSE_SAMPLES)
    df = np.broadcast_to(np.asarray(pair.df(u), dtype=float), u.shape)
    dg = np.broadcast_to(np.asarray(pair.dg(u), dtype=float), u.shape)
    return float(max(np.max(np.abs(df)), np.max(np.abs(dg)))) * (1.0 + 1e-6)


def polygonal_wave_speed(f_nu: PiecewiseAffineFlux, g_nu: PiecewiseAffineFlux, m: float) -> float:
    """Largest table slope on cells meeting ``[-m, m]``; bounds every front speed."""
    out = 0.0
    for fl in (f_nu, g_nu):
        sl = fl.slopes()
        left = fl.nodes()[:-1]
        keep = (left + fl.h > -m) & (left < m)
        if np.any(keep):
            out = max(out, float(np.max(np.abs(sl[keep]))))
    return out
