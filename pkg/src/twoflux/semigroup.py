"""The front-tracking semigroup at a fixed flux resolution, and refinement studies."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from . import tracker
from .flux import FluxError, SmoothFluxPair, max_wave_speed, sample_flux
from .profile import Profile


def quantize_initial(p: Profile, nu: int) -> Profile:
    """Move every value onto the ``2**-nu`` grid without adding variation.

    Cells are visited in order and the grid value only moves when the data
    is a full grid step away, by whole steps toward the data.  The result
    stays within one step of ``p``, never increases the total variation or
    the sup norm, and leaves grid-valued data unchanged.  Line data start
    from the zero state; periodic data start at the cell of largest
    magnitude, truncated toward zero, which makes the sweep close up.
    """
    scale = 2.0 ** nu
    v = p.values * scale
    n = v.size
    if p.is_periodic:
        start = int(np.argmax(np.abs(v)))
        q = math.trunc(v[start])
    else:
        start, q = 0, 0
    out = np.empty(n)
    for i in range(n):
        j = (start + i) % n
        x = float(v[j])
        if x >= q + 1:
            q = math.floor(x)
        elif x <= q - 1:
            q = math.ceil(x)
        out[j] = q
    return Profile(p.breakpoints, out / scale, p.topology).normalized()


def flux_window(p: Profile, nu: int, pair: SmoothFluxPair):
    """State window ``[-M - h, M + h]`` for data bounded by ``M``; must sit inside the pair's range."""
    m = float(np.max(np.abs(p.values)))
    h = 2.0 ** -nu
    lo, hi = -m - h, m + h
    if lo < pair.u_range[0] or hi > pair.u_range[1]:
        raise FluxError(f"data range [{lo}, {hi}] exceeds the flux range {pair.u_range}")
    return lo, hi


@dataclass
class SemigroupRun:
    nu: int
    initial: Profile
    quantized: Profile
    pair: SmoothFluxPair
    T: float
    sample_times: list
    profiles: list = field(default_factory=list)
    plateaus: list = field(default_factory=list)
    report: dg.DiagnosticsReport = field(default_factory=dg.DiagnosticsReport)
    stats: tracker.TrackerStats | None = None
    events: list = field(default_factory=list)
    fluxes: tuple | None = None
    initial_min_width: float | None = None
    lam: float = 0.0

    @property
    def final(self) -> Profile:
        return self.profiles[-1]

    def front_bound(self) -> float:
        return tracker.front_bound(self.quantized, self.nu)


def _sample_grid(T: float, sample_times) -> list[float]:
    times = sorted({float(t) for t in (() if sample_times is None else sample_times)} | {float(T)})
    if times and (times[0] < 0 or times[-1] > T):
        raise ValueError("sample times must lie in [0, T]")
    return times


def run(nu: int, p: Profile, pair: SmoothFluxPair, T: float, sample_times=None, *,
        log_events: bool = False, mutate: bool = False,
        restart_cap: int = tracker.DEFAULT_RESTART_CAP) -> SemigroupRun:
    """Quantize ``p``, track it to ``T`` and record a profile and diagnostics at each sample time."""
    if T < 0:
        raise ValueError("T must be non-negative")
    times = _sample_grid(T, sample_times)
    q = quantize_initial(p, nu)
    fluxes = sample_flux(pair, nu, flux_window(q, nu, pair))
    state = tracker.init_from_profile(q, fluxes, horizon=T, restart_cap=restart_cap,
                                      mutate=mutate)
    out = SemigroupRun(nu, p, q, pair, T, times, fluxes=fluxes,
                       initial_min_width=state.min_plateau_width(),
                       lam=max_wave_speed(pair, float(np.max(np.abs(q.values)))))
    for t in times:
        tracker.evolve_to(state, t, log_events=log_events)
        prof = state.profile()
        out.profiles.append(prof)
        out.report.add_sample(t, prof, state.front_count, state.min_plateau_width())
        out.plateaus.append(state.plateaus())
    out.stats = state.stats
    out.events = list(state.events)
    return out


# -- refinement ladder ------------------------------------------------------

@dataclass
class LadderRow:
    nu: int
    distance: float
    ratio: float | None
    order: float | None
    apriori: float
    estimate: float
    max_fronts: int

    def as_tuple(self):
        return (self.nu, self.distance, self.ratio, self.order, self.apriori, self.estimate,
                self.max_fronts)


@dataclass
class LadderResult:
    rows: list
    reference_nu: int
    T: float

    def distances(self) -> list[float]:
        return [r.distance for r in self.rows]


def _final_profile(args):
    nu, p, pair, T = args
    r = run(nu, p, pair, T)
    return r.final, r.stats.max_fronts


def nu_ladder(p: Profile, pair: SmoothFluxPair, T: float, nus, *, jobs: int = 1) -> LadderResult:
    """Distances ``||S^nu_T p - S^nu_max_T p||_1`` with ratios, empirical orders and bounds.

    ``apriori`` is ``TV * 2**-nu * T`` (the constant is unknown, so it is a
    shape reference).  ``estimate`` is the flux-perturbation bound against
    the finest rung with the rung's largest front count.
    """
    nus = [int(n) for n in nus]
    if nus != sorted(set(nus)):
        raise ValueError("nus must be strictly increasing")
    tasks = [(nu, p, pair, T) for nu in nus]
    if jobs > 1 and len(nus) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_final_profile, tasks))
    else:
        results = [_final_profile(t) for t in tasks]
    ref = results[-1][0]
    tv0 = dg.tot_var(p)
    m = float(np.max(np.abs(p.values)))
    rows = []
    for i, (nu, (prof, nfront)) in enumerate(zip(nus, results)):
        d = dg.l1_distance(prof, ref)
        est = dg.flux_error_estimate(nu, nus[-1], pair, tv0, nfront, state_range=(-m, m)) * T
        rows.append(LadderRow(nu, d, None, None, tv0 * 2.0 ** -nu * T, est, nfront))
    for a, b in zip(rows, rows[1:]):
        if b.distance > 0 and a.distance > 0:
            a.ratio = a.distance / b.distance
            a.order = math.log2(a.ratio) / (b.nu - a.nu)
    return LadderResult(rows, nus[-1], T)


# -- line problems on a large circle -----------------------------------------

@dataclass(frozen=True)
class WrappedProblem:
    """A line problem placed on a circle of length ``period`` and rescaled to unit period.

    Space ``x`` maps to ``(x - origin) / period``; time is divided by
    ``period`` as well, so fluxes are unchanged.
    """

    profile: Profile
    period: float
    origin: float
    T: float

    @property
    def time_scale(self) -> float:
        return 1.0 / self.period

    def unwrap(self, q: Profile) -> Profile:
        """Periodic result back on the line window ``[origin, origin + period)``."""
        b = q.breakpoints * self.period + self.origin
        edges = np.concatenate(([self.origin], b, [self.origin + self.period]))
        vals = np.concatenate(([q.values[-1]], q.values))
        if b[0] == self.origin:
            edges, vals = edges[1:], vals[1:]
        return Profile.line(edges, vals)


def wrap_line_to_periodic(p: Profile, pair: SmoothFluxPair, T: float, *,
                          margin: float = 1.0) -> WrappedProblem:
    """Period ``2R + T lam + margin`` with the support ``[-R, R]`` centred in the window."""
    if p.is_periodic:
        raise ValueError("profile is already periodic")
    a, b = p.support()
    r = max(abs(a), abs(b))
    lam = max_wave_speed(pair, float(np.max(np.abs(p.values))))
    period = 2.0 * r + T * lam + margin
    origin = -0.5 * period
    lo, hi, v = p.cells()
    y_lo = (lo - origin) / period
    y_hi = (hi - origin) / period
    b_all = np.concatenate(([0.0], y_lo, [y_hi[-1]]))
    v_all = np.concatenate(([0.0], v, [0.0]))
    b_keep, v_keep = [], []
    for y, val in zip(b_all, v_all):
        if b_keep and y <= b_keep[-1]:
            v_keep[-1] = val
            continue
        if y >= 1.0:
            break
        b_keep.append(float(y))
        v_keep.append(float(val))
    wrapped = Profile.periodic(b_keep, v_keep).normalized()
    return WrappedProblem(wrapped, period, origin, T / period)
