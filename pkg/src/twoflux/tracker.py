"""Event-driven front tracking for the two-flux law.

A :class:`TrackerState` owns one compiled (or interpreted) ``Engine``.  The
engine keeps fronts and cell values in flat arrays; this module turns them
into :class:`Front`/:class:`Plateau` records and profiles, and drives the
loop of integration, event detection and restarts.

Between events every front away from an extremum moves at a constant speed.
A cell that is a strict local maximum (minimum) is a plateau: its value
falls (rises) at rate ``(g - f)(u_hat) / width`` while its bounding fronts
follow the Rankine-Hugoniot speed of the current states.  Any interaction,
vanishing jump or loss of Liu admissibility triggers a restart, which
snapshots the profile and re-solves every jump.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .backend import core
from .flux import PiecewiseAffineFlux, polygonal_wave_speed
from .profile import Profile, Topology
from .riemann import Family, Front

# Mirrors of the engine's return codes (the compiled module keeps them C-level).
EV_NONE = 0
EV_COLLISION = 1
EV_VANISH = 2
EV_ADMISSIBILITY = 3
EV_MERGE = 4
ERR_WIDTH = -1
ERR_NONFINITE = -2
ERR_CAP = -3

DEFAULT_RESTART_CAP = 10 ** 6


class EventKind(str, Enum):
    COLLISION = "Collision"
    JUMP_VANISHES = "JumpVanishes"
    ADMISSIBILITY_LOSS = "AdmissibilityLoss"
    EXTREMA_MERGE = "ExtremaMerge"


_KIND_OF_CODE = {
    EV_COLLISION: EventKind.COLLISION,
    EV_VANISH: EventKind.JUMP_VANISHES,
    EV_ADMISSIBILITY: EventKind.ADMISSIBILITY_LOSS,
    EV_MERGE: EventKind.EXTREMA_MERGE,
}


class PlateauKind(str, Enum):
    MAX = "max"
    MIN = "min"


class TrackerError(RuntimeError):
    """Numerical abort; ``state`` is kept for inspection."""

    def __init__(self, message, state=None, code=0):
        super().__init__(message)
        self.state = state
        self.code = code


class RestartCapExceeded(TrackerError):
    pass


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float
    location: float
    front: int
    horizon: float

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind.value, "location": self.location,
                "front": self.front}


@dataclass(frozen=True)
class Plateau:
    kind: PlateauKind
    left_front_index: int
    right_front_index: int
    u_hat: float
    x_left: float
    x_right: float

    @property
    def width(self) -> float:
        return self.x_right - self.x_left


@dataclass
class TrackerStats:
    restarts: int = 0
    collisions: int = 0
    vanishings: int = 0
    admissibility_losses: int = 0
    extrema_merges: int = 0
    max_fronts: int = 0
    rk4_steps: int = 0
    kinks: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrackerState:
    engine: object
    f_nu: PiecewiseAffineFlux
    g_nu: PiecewiseAffineFlux
    topology: Topology
    support: tuple
    sigma: float
    restart_cap: int = DEFAULT_RESTART_CAP
    initial_fronts: int = 0
    events: list = field(default_factory=list)

    # -- scalar views -------------------------------------------------

    @property
    def time(self) -> float:
        return float(self.engine.t)

    @property
    def periodic(self) -> bool:
        return self.topology is Topology.PERIODIC

    @property
    def front_count(self) -> int:
        return int(self.engine.n)

    @property
    def stats(self) -> TrackerStats:
        e = self.engine
        return TrackerStats(int(e.n_restart), int(e.n_collision), int(e.n_vanish),
                            int(e.n_admissibility), int(e.n_merge), int(e.max_fronts),
                            int(e.n_steps), int(e.n_kinks))

    # -- structured views ---------------------------------------------

    def _cell_value(self, c: int) -> float:
        return float(self.engine.cv[c % self.engine.ncell])

    def fronts(self) -> list[Front]:
        e = self.engine
        scale = 2.0 ** e.nu
        out = []
        for k in range(e.n):
            ul = self._cell_value(k)
            ur = self._cell_value(k + 1)
            fam = Family.F if e.fam[k] > 0 else Family.G
            tab = self.f_nu.values if fam is Family.F else self.g_nu.values
            if e.dslot[k] >= 0:
                speed = core.chord(tab, e.jmin, scale, ul, ur)
            else:
                speed = float(e.spd[k])
            out.append(Front(float(e.x[k]), float(speed), ul, ur, fam))
        return out

    def plateaus(self) -> list[Plateau]:
        e = self.engine
        out = []
        for p in range(e.np_):
            c = int(e.pcell[p])
            kl, kr = int(e.plf[p]), int(e.prf[p])
            xl, xr = float(e.x[kl]), float(e.x[kr])
            if c == 0:
                xl -= 1.0
            kind = PlateauKind.MAX if e.kind[c] > 0 else PlateauKind.MIN
            out.append(Plateau(kind, kl, kr, float(e.cv[c]), xl, xr))
        return out

    def min_plateau_width(self) -> float | None:
        widths = [p.width for p in self.plateaus()]
        return min(widths) if widths else None

    def profile(self) -> Profile:
        """Current solution as a profile (no merging beyond collapsed cells)."""
        cap = self.engine.n + 2
        px = np.zeros(cap)
        pw = np.zeros(cap + 1)
        m = self.engine.snapshot(px, pw)
        nv = m if self.periodic else m + 1
        return Profile.from_jumps(px[:m], pw[:max(nv, 1)], self.topology, support=self.support)

    def history(self) -> dict:
        """Diagnostics recorded at load and after each restart."""
        e = self.engine
        n = int(e.hlen)
        cols = {"time": e.h_t, "kind": e.h_kind, "fronts": e.h_n, "plateaus": e.h_np,
                "tv": e.h_tv, "linf": e.h_linf, "pos_mass": e.h_pos, "neg_mass": e.h_neg,
                "min_width": e.h_minw}
        return {k: np.asarray(v)[:n].copy() for k, v in cols.items()}

    def copy(self) -> "TrackerState":
        other = TrackerState(self.engine.copy(), self.f_nu, self.g_nu, self.topology,
                             self.support, self.sigma, self.restart_cap, self.initial_fronts,
                             list(self.events))
        return other


def _check_fluxes(f_nu: PiecewiseAffineFlux, g_nu: PiecewiseAffineFlux):
    if (f_nu.nu, f_nu.j_min, f_nu.j_max) != (g_nu.nu, g_nu.j_min, g_nu.j_max):
        raise ValueError("f_nu and g_nu must share the same grid window")


def _time_tol(horizon: float) -> float:
    return 1e-12 * max(1.0, abs(horizon))


def init_from_profile(p: Profile, fluxes, *, sigma: float | None = None, horizon: float = 1.0,
                      restart_cap: int = DEFAULT_RESTART_CAP, record: bool = True,
                      mutate: bool = False) -> TrackerState:
    """Replace every jump of ``p`` by its Riemann fan and register the plateaus.

    ``mutate`` makes maximum plateaus erode at twice the correct rate; it
    exists only so property checks can prove they catch a broken tracker.
    """
    f_nu, g_nu = fluxes
    _check_fluxes(f_nu, g_nu)
    if p.n_cells < 1:
        raise ValueError("profile needs at least one cell")
    lo, hi = f_nu.window
    vmin, vmax = float(np.min(p.values)), float(np.max(p.values))
    if not p.is_periodic:
        vmin, vmax = min(vmin, 0.0), max(vmax, 0.0)
    if vmin < lo or vmax > hi:
        raise ValueError(f"profile values [{vmin}, {vmax}] leave the flux window {f_nu.window}")
    linf = max(abs(vmin), abs(vmax))
    if sigma is None:
        sigma = 1e-13 * max(1.0, linf)
    lam = polygonal_wave_speed(f_nu, g_nu, linf + f_nu.h)
    nodes = f_nu.nodes()
    near = np.abs(nodes) <= linf + f_nu.h
    gap = g_nu.values - f_nu.values
    maxgap = float(np.max(gap[near])) if np.any(near) else float(np.max(gap))
    tol_t = _time_tol(horizon)
    eng = core.Engine(f_nu.values, g_nu.values, f_nu.j_min, f_nu.nu, p.is_periodic,
                      float(sigma), tol_t, float(lam), maxgap)
    eng.record = bool(record)
    eng.mutate = bool(mutate)
    px, pw = p.to_jumps()
    px = np.ascontiguousarray(px, dtype=float)
    pw = np.ascontiguousarray(pw, dtype=float)
    eng.load(px, pw, px.size)
    support = (0.0, 1.0) if p.is_periodic else (float(p.breakpoints[0]), float(p.breakpoints[-1]))
    return TrackerState(eng, f_nu, g_nu, p.topology, support, float(sigma), restart_cap,
                        int(px.size))


def _set_horizon(state: TrackerState, t_max: float):
    tol = _time_tol(t_max)
    state.engine.tol_t = tol
    state.engine.probe = 10.0 * tol


def _raise_for(state: TrackerState, code: int):
    if code == ERR_WIDTH:
        raise TrackerError(f"plateau width collapsed at t={state.time}", state, code)
    if code == ERR_NONFINITE:
        raise TrackerError(f"non-finite plateau state at t={state.time}", state, code)
    if code == ERR_CAP:
        raise RestartCapExceeded(
            f"more than {state.restart_cap} restarts before t={state.time}", state, code)
    raise TrackerError(f"engine error {code}", state, code)


def advance(state: TrackerState, dt: float) -> TrackerState:
    """Integrate without acting on events (the caller guarantees none occur)."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    code = state.engine.integrate(state.time + dt, False)
    if code < 0:
        _raise_for(state, code)
    return state


def _event_from(engine, code: int, horizon: float) -> Event:
    return Event(_KIND_OF_CODE[code], float(engine.t), float(engine.ev_pos),
                 int(engine.ev_front), float(horizon))


def next_event(state: TrackerState, t_max: float) -> Event | None:
    """Earliest restart event in ``(t, t_max]``, found on a scratch copy."""
    if t_max <= state.time:
        return None
    _set_horizon(state, t_max)
    scratch = state.engine.copy()
    code = scratch.integrate(t_max, True)
    if code < 0:
        _raise_for(state, code)
    if code == EV_NONE:
        return None
    return _event_from(scratch, code, t_max)


def apply_restart(state: TrackerState, event: Event) -> TrackerState:
    """Bring the state to ``event`` and restart from its snapshot."""
    eng = state.engine
    _set_horizon(state, event.horizon)
    code = eng.integrate(max(event.horizon, state.time), True)
    if code < 0:
        _raise_for(state, code)
    if eng.n_restart >= state.restart_cap:
        _raise_for(state, ERR_CAP)
    if code > 0:
        state.events.append(_event_from(eng, code, event.horizon))
    else:
        eng.clear_triggers()
        eng.ev_kind = EV_NONE
    eng.restart()
    return state


def evolve_to(state: TrackerState, T: float, *, log_events: bool = False) -> TrackerState:
    """Run until time ``T`` restarting at every event.

    With ``log_events`` every event is appended to ``state.events`` (slower:
    control returns to Python at each restart).
    """
    if T < state.time:
        raise ValueError("cannot evolve backwards")
    _set_horizon(state, T)
    eng = state.engine
    if not log_events:
        code = eng.evolve(T, state.restart_cap)
        if code < 0:
            _raise_for(state, code)
        return state
    while True:
        code = eng.integrate(T, True)
        if code == EV_NONE:
            return state
        if code < 0:
            _raise_for(state, code)
        if eng.n_restart >= state.restart_cap:
            _raise_for(state, ERR_CAP)
        state.events.append(_event_from(eng, code, T))
        eng.restart()


def _flat_theta(e, c: int, n: int, periodic: bool) -> float:
    """Switch value on a non-extremal cell: 1 if the profile rises through it, else 0."""
    v = float(e.cv[c])
    if periodic or c < n:
        return 1.0 if float(e.cv[(c + 1) % e.ncell]) > v else 0.0
    return 1.0 if v > float(e.cv[c - 1]) else 0.0


def cell_table(state: TrackerState):
    """Cells of the tracked solution: ``(left, right, value, theta_left, theta_right)``.

    Line states include the two unbounded outer cells.  Periodic cells are
    listed in engine order; positions are not wrapped.
    """
    e = state.engine
    n = int(e.n)
    if n == 0:
        lo, hi = (0.0, 1.0) if state.periodic else (-np.inf, np.inf)
        v = float(e.cv[0])
        return (np.array([lo]), np.array([hi]), np.array([v]), np.array([0.5]), np.array([0.5]))
    xs = np.asarray(e.x[:n], dtype=float)
    if state.periodic:
        left = np.concatenate(([xs[-1] - 1.0], xs[:-1]))
        right = xs.copy()
    else:
        left = np.concatenate(([-np.inf], xs))
        right = np.concatenate((xs, [np.inf]))
    nc = left.size
    vals = np.asarray(e.cv[:nc], dtype=float).copy()
    th_l = np.empty(nc)
    th_r = np.empty(nc)
    for c in range(nc):
        kind = int(e.kind[c])
        if kind > 0:
            th_l[c], th_r[c] = 1.0, 0.0
        elif kind < 0:
            th_l[c], th_r[c] = 0.0, 1.0
        else:
            th_l[c] = th_r[c] = _flat_theta(e, c, n, state.periodic)
    return left, right, vals, th_l, th_r


def interpolated_theta(state: TrackerState, x: float) -> float:
    """Switch value of the tracked solution at ``x``.

    Affine across a plateau (1 to 0 across a maximum, 0 to 1 across a
    minimum), 1 on increasing and 0 on decreasing stretches.
    """
    left, right, _, th_l, th_r = cell_table(state)
    if state.periodic:
        x = left[0] + np.mod(x - left[0], 1.0)
    c = int(np.clip(np.searchsorted(right, x, side="right"), 0, left.size - 1))
    if th_l[c] == th_r[c]:
        return float(th_l[c])
    w = right[c] - left[c]
    return float(th_l[c] + (th_r[c] - th_l[c]) * (x - left[c]) / w)


def snapshot(state: TrackerState) -> Profile:
    return state.profile()


def extremum_count(p: Profile) -> int:
    """Cells strictly above or strictly below both neighbours (line data see 0 outside)."""
    v = p.normalized().values
    if p.is_periodic:
        if v.size < 2:
            return 0
        left, right = np.roll(v, 1), np.roll(v, -1)
    else:
        left = np.concatenate(([0.0], v[:-1]))
        right = np.concatenate((v[1:], [0.0]))
    return int(np.sum(((v > left) & (v > right)) | ((v < left) & (v < right))))


def front_bound(initial: Profile, nu: int) -> float:
    """Upper bound on the live front count: twice the extremum cells plus 2^nu times the variation."""
    px, pw = initial.to_jumps()
    if initial.is_periodic:
        tv = float(np.sum(np.abs(np.roll(pw, -1) - pw))) if px.size else 0.0
    else:
        tv = float(np.sum(np.abs(np.diff(pw))))
    return 2 * extremum_count(initial) + 2.0 ** nu * tv
