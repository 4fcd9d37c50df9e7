"""Norms, mass bookkeeping, weak-form residuals and the inequality checks.

Every norm here is exact for piecewise-constant inputs: both arguments are
evaluated on the union of their breakpoints and the integrals are finite
sums.  Viscous fields enter through ``to_profile()`` (cell averages are a
piecewise-constant function on the grid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from .flux import SmoothFluxPair, sample_flux
from .profile import Profile, Topology


class TopologyMismatch(ValueError):
    pass


def _as_profile(a) -> Profile:
    if isinstance(a, Profile):
        return a
    if hasattr(a, "to_profile"):
        return a.to_profile()
    raise TypeError(f"cannot interpret {type(a).__name__} as a profile")


def _common_cells(a: Profile, b: Profile):
    """Union partition: cell widths and the values of a and b on each cell."""
    if a.topology is not b.topology:
        raise TopologyMismatch("profiles live on different topologies")
    if a.is_periodic:
        edges = np.union1d(np.union1d(a.breakpoints, b.breakpoints), [0.0])
        edges = np.append(edges, 1.0)
    else:
        edges = np.union1d(a.breakpoints, b.breakpoints)
    mids = 0.5 * (edges[:-1] + edges[1:])
    return np.diff(edges), a.evaluate(mids), b.evaluate(mids)


def l1_distance(a, b) -> float:
    pa, pb = _as_profile(a), _as_profile(b)
    w, va, vb = _common_cells(pa, pb)
    return float(math.fsum(w * np.abs(va - vb)))


def l1_norm(a) -> float:
    p = _as_profile(a)
    lo, hi, v = p.cells()
    return float(math.fsum((hi - lo) * np.abs(v)))


def mass(a) -> float:
    p = _as_profile(a)
    lo, hi, v = p.cells()
    return float(math.fsum((hi - lo) * v))


def tot_var(a) -> float:
    p = _as_profile(a)
    v = p.values
    if p.is_periodic:
        return float(math.fsum(np.abs(np.roll(v, 1) - v)))
    full = np.concatenate(([0.0], v, [0.0]))
    return float(math.fsum(np.abs(np.diff(full))))


def linf(a) -> float:
    return float(np.max(np.abs(_as_profile(a).values)))


def positive_part_l1(a, b) -> float:
    """Integral of max(a - b, 0): how much ``a`` exceeds ``b``."""
    w, va, vb = _common_cells(_as_profile(a), _as_profile(b))
    return float(math.fsum(w * np.maximum(va - vb, 0.0)))


def ordering_violation(a, b, sliver: float = 1e-9) -> float:
    """Largest ``a - b`` over union cells wider than ``sliver`` (0 if ordered)."""
    w, va, vb = _common_cells(_as_profile(a), _as_profile(b))
    keep = w > sliver
    if not np.any(keep):
        return 0.0
    return float(max(0.0, np.max(va[keep] - vb[keep])))


@dataclass(frozen=True)
class SignInterval:
    lo: float
    hi: float
    sign: int
    mass: float


def sign_interval_masses(p: Profile) -> list[SignInterval]:
    """Maximal intervals of constant sign of a line profile with their signed masses."""
    if p.is_periodic:
        raise TopologyMismatch("sign intervals are defined for line profiles")
    lo, hi, v = p.cells()
    out: list[SignInterval] = []
    for a, b, val in zip(lo, hi, v):
        s = int(np.sign(val))
        if s == 0:
            continue
        m = (b - a) * val
        if out and out[-1].sign == s and out[-1].hi == a:
            last = out[-1]
            out[-1] = SignInterval(last.lo, b, s, last.mass + m)
        else:
            out.append(SignInterval(float(a), float(b), s, float(m)))
    return out


# -- verdicts -------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "detail": self.detail}


def nonincreasing_verdict(name: str, series, tol: float) -> Verdict:
    """Margin is the smallest ``prev - next`` (negative means growth)."""
    s = np.asarray(series, dtype=float)
    if s.size < 2:
        return Verdict(name, True, math.inf, "fewer than two samples")
    margin = float(np.min(s[:-1] - s[1:]))
    return Verdict(name, margin >= -tol, margin)


def plateau_width_bound(t, l0: float, lam: float, m: float, c0: float):
    """Lower bound on plateau widths at time ``t``.

    Widths start at ``l0`` and shrink at most at rate ``2 lam``; once the
    value has drifted far enough they regrow at least linearly, with slope
    ``2 lam / (exp(4 lam m / c0) - 1)`` after ``t0 = l0 / (4 lam)``.
    """
    t = np.asarray(t, dtype=float)
    if lam <= 0.0:
        return np.full_like(t, l0) if t.ndim else float(l0)
    shrink = l0 - 2.0 * lam * t
    t0 = l0 / (4.0 * lam)
    growth = 2.0 * lam * (t - t0) / math.expm1(4.0 * lam * m / c0)
    out = np.maximum(shrink, growth)
    return float(out) if out.ndim == 0 else out


def plateau_bound_check(times, widths, l0: float, lam: float, m: float, c0: float,
                        slack: float = 1e-6) -> Verdict:
    """Compare measured minimum plateau widths to the bound; ``None`` widths are skipped."""
    worst = math.inf
    where = ""
    for t, w in zip(times, widths):
        if w is None:
            continue
        bound = plateau_width_bound(t, l0, lam, m, c0) * (1.0 - slack)
        marg = w - bound
        if marg < worst:
            worst, where = marg, f"t={t:.6g} width={w:.6g} bound={bound:.6g}"
    return Verdict("plateau_width", worst >= 0.0, worst, where)


# -- flux interpolation error ---------------------------------------------

def flux_error_estimate(nu: int, mu: int, pair: SmoothFluxPair, tv: float, n_intervals: float,
                        state_range=None) -> float:
    """Perturbation bound between resolutions ``nu <= mu``.

    ``(W1inf(f_mu - f_nu) + W1inf(g_mu - g_nu)) * tv + (sup|f_mu - f_nu| +
    sup|g_mu - g_nu|) * n_intervals``.  Both interpolants are affine on each
    ``2**-mu`` cell, so the norms are exact maxima over those nodes and cells.
    """
    if mu < nu:
        raise ValueError("mu must be >= nu")
    window = state_range if state_range is not None else pair.u_range
    fn, gn = sample_flux(pair, nu, window)
    fm, gm = sample_flux(pair, mu, fn.window)
    u = fm.nodes()
    w1 = sup = 0.0
    for coarse, fine in ((fn, fm), (gn, gm)):
        d = fine.values - coarse(u)
        s = float(np.max(np.abs(d)))
        lip = float(np.max(np.abs(np.diff(d)))) * 2.0 ** mu
        sup += s
        w1 += s + lip
    return w1 * tv + sup * n_intervals


# -- weak-form residual ---------------------------------------------------

def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    z = s[inside]
    out[inside] = np.exp(1.0 / (z * z - 1.0))
    return out


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    z = s[inside]
    q = z * z - 1.0
    out[inside] = np.exp(1.0 / q) * (-2.0 * z / (q * q))
    return out


class _BumpIntegral:
    """Antiderivative of the bump, accurate to about 1e-14 on [-1, 1]."""

    def __init__(self, nodes: int = 4001):
        s = np.linspace(-1.0, 1.0, nodes)
        vals = np.zeros(nodes)
        for i in range(1, nodes):
            vals[i] = vals[i - 1] + integrate.quad(_bump_scalar, s[i - 1], s[i],
                                                   epsabs=1e-16, epsrel=1e-14)[0]
        self.total = float(vals[-1])
        self._spline = interpolate.CubicHermiteSpline(s, vals, _bump(s))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self._spline(np.clip(s, -1.0, 1.0))
        return np.where(s >= 1.0, self.total, np.where(s <= -1.0, 0.0, out))


def _bump_scalar(s: float) -> float:
    return math.exp(1.0 / (s * s - 1.0)) if abs(s) < 1.0 else 0.0


_BUMP_INTEGRAL: _BumpIntegral | None = None


def _bump_integral() -> _BumpIntegral:
    global _BUMP_INTEGRAL
    if _BUMP_INTEGRAL is None:
        _BUMP_INTEGRAL = _BumpIntegral()
    return _BUMP_INTEGRAL


@dataclass(frozen=True)
class TestBump:
    """``phi(t, x) = b((t - t_c) / r_t) * b((x - x_c) / r_x)`` with the standard mollifier ``b``."""

    t_c: float
    r_t: float
    x_c: float
    r_x: float

    __test__ = False  # not a pytest class

    def time_factor(self, t):
        return _bump((np.asarray(t) - self.t_c) / self.r_t)

    def time_factor_prime(self, t):
        return _bump_prime((np.asarray(t) - self.t_c) / self.r_t) / self.r_t

    def space_factor(self, x):
        return _bump((np.asarray(x) - self.x_c) / self.r_x)

    def space_integral(self, x):
        """Antiderivative of the space factor in x (zero left of its support)."""
        return _bump_integral()((np.asarray(x) - self.x_c) / self.r_x) * self.r_x


def random_bumps(rng: np.random.Generator, count: int, t_range, x_range,
                 r_t=(0.05, 0.3), r_x=(0.05, 0.5)) -> list[TestBump]:
    """Bumps whose supports fit inside ``t_range`` x ``x_range``."""
    out = []
    for _ in range(count):
        rt = rng.uniform(*r_t)
        rt = min(rt, 0.49 * (t_range[1] - t_range[0]))
        rx = rng.uniform(*r_x)
        rx = min(rx, 0.49 * (x_range[1] - x_range[0]))
        tc = rng.uniform(t_range[0] + rt, t_range[1] - rt)
        xc = rng.uniform(x_range[0] + rx, x_range[1] - rx)
        out.append(TestBump(tc, rt, xc, rx))
    return out


def _simpson_nodes(breaks, n_total: int, inset: float = 0.0):
    """Simpson nodes and weights with every ``breaks`` point a panel edge.

    The integrand may jump at a break (a restart), so panel edges are moved
    ``inset`` inward and sampled as one-sided limits.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    span = breaks[-1] - breaks[0]
    ts, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        k = max(1, int(math.ceil(0.5 * n_total * (b - a) / span)))
        t = np.linspace(a, b, 2 * k + 1)
        if b - a > 4.0 * inset:
            t[0] += inset
            t[-1] -= inset
        w = np.full(2 * k + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        ts.append(t)
        ws.append(w * (b - a) / (6.0 * k))
    return np.concatenate(ts), np.concatenate(ws)


def _space_terms(state, bumps):
    """Per bump, the exact x-integrals of ``u * b_x`` and ``F * b_x'``."""
    from .tracker import cell_table

    left, right, vals, th_l, th_r = cell_table(state)
    fv, gv = state.f_nu(vals), state.g_nu(vals)
    flux_l = th_l * fv + (1.0 - th_l) * gv
    flux_r = th_r * fv + (1.0 - th_r) * gv
    res_u = np.zeros(len(bumps))
    res_f = np.zeros(len(bumps))
    for j, bump in enumerate(bumps):
        s_lo, s_hi = bump.x_c - bump.r_x, bump.x_c + bump.r_x
        shifts = [0]
        if state.periodic:
            shifts = range(int(math.floor(s_lo - right.max())), int(math.ceil(s_hi - left.min())) + 1)
        for shift in shifts:
            a, b = left + shift, right + shift
            hit = (b > s_lo) & (a < s_hi)
            if not np.any(hit):
                continue
            a, b = a[hit], b[hit]
            ia, ib = bump.space_integral(a), bump.space_integral(b)
            pa = np.where(np.isfinite(a), bump.space_factor(np.where(np.isfinite(a), a, 0.0)), 0.0)
            pb = np.where(np.isfinite(b), bump.space_factor(np.where(np.isfinite(b), b, 0.0)), 0.0)
            fl, fr = flux_l[hit], flux_r[hit]
            res_u[j] += math.fsum(vals[hit] * (ib - ia))
            # by parts: F is affine across each cell, constant off plateaus
            slope = np.zeros_like(fl)
            tilt = fr != fl
            slope[tilt] = (fr[tilt] - fl[tilt]) / (b[tilt] - a[tilt])
            res_f[j] += math.fsum(fr * pb - fl * pa - slope * (ib - ia))
    return res_u, res_f


def weak_residual(initial: Profile, fluxes, T: float, bumps, *, n_time: int = 10000,
                  sigma=None) -> np.ndarray:
    """Weak-form residual of the tracked solution against each test bump.

    Computes ``int int u phi_t + F phi_x dx dt`` where ``F`` blends
    ``f_nu`` and ``g_nu`` with the interpolated switch.  The x-integrals
    are exact cell sums; time uses composite Simpson with panel edges on
    the restart times.
    """
    from . import tracker

    scout = tracker.init_from_profile(initial, fluxes, horizon=T, sigma=sigma)
    tracker.evolve_to(scout, T, log_events=True)
    breaks = [0.0, T] + [e.time for e in scout.events if 0.0 < e.time < T]
    ts, ws = _simpson_nodes(breaks, n_time, inset=1e-9 * max(1.0, T))
    state = tracker.init_from_profile(initial, fluxes, horizon=T, sigma=sigma)
    total = np.zeros(len(bumps))
    for t, w in zip(ts, ws):
        active = [j for j, b in enumerate(bumps) if abs(t - b.t_c) < b.r_t]
        if not active:
            continue
        tracker.evolve_to(state, float(t))
        sub = [bumps[j] for j in active]
        bt = np.array([float(b.time_factor(t)) for b in sub])
        dbt = np.array([float(b.time_factor_prime(t)) for b in sub])
        su, sf = _space_terms(state, sub)
        total[active] += w * (dbt * su + bt * sf)
    return total


# -- report ---------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    times: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    tv: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    front_count: list = field(default_factory=list)
    min_plateau_width: list = field(default_factory=list)
    sign_masses: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)

    def add_sample(self, t: float, profile: Profile, fronts: int, min_width):
        self.times.append(float(t))
        self.l1.append(l1_norm(profile))
        self.linf.append(linf(profile))
        self.tv.append(tot_var(profile))
        self.mass.append(mass(profile))
        self.front_count.append(int(fronts))
        self.min_plateau_width.append(None if min_width is None else float(min_width))
        if profile.topology is Topology.LINE:
            self.sign_masses.append([(s.lo, s.hi, s.sign, s.mass)
                                     for s in sign_interval_masses(profile)])

    def check_monotone(self, tol: float = 1e-10):
        for name in ("tv", "linf"):
            self.verdicts.append(nonincreasing_verdict(name, getattr(self, name), tol))
        return self.verdicts

    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def rows(self):
        """CSV rows: time, l1, linf, tv, mass, fronts, min_plateau_width."""
        for i, t in enumerate(self.times):
            w = self.min_plateau_width[i]
            yield (t, self.l1[i], self.linf[i], self.tv[i], self.mass[i], self.front_count[i],
                   "" if w is None else w)

    def to_dict(self) -> dict:
        return {"times": self.times, "l1": self.l1, "linf": self.linf, "tv": self.tv,
                "mass": self.mass, "front_count": self.front_count,
                "min_plateau_width": self.min_plateau_width,
                "residuals": [float(r) for r in self.residuals],
                "verdicts": [v.to_dict() for v in self.verdicts]}
