"""Explicit conservative scheme for the viscous two-flux equation on the unit circle.

The interface flux blends ``f`` and ``g`` with the smooth switch evaluated
at the one-sided gradient across the interface, plus ``delta`` times the
usual second difference.  The compiled kernel handles polynomial fluxes of
degree <= 4; anything else (or the interpreted backend) uses numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .flux import SmoothFluxPair, SwitchFunction, max_wave_speed
from .profile import Profile

CFL_SAFETY = 0.4
_NCOEF = 5


class ViscousBlowUp(RuntimeError):
    """Non-finite values appeared; carries the step count reached."""

    def __init__(self, message, steps):
        super().__init__(message)
        self.steps = steps


@dataclass(frozen=True, eq=False)
class ViscousField:
    values: np.ndarray
    eps: float
    delta: float
    pair: SmoothFluxPair
    time: float = 0.0
    steps: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a field needs at least two cells")
        if not (self.eps > 0 and self.delta >= 0):
            raise ValueError("need eps > 0 and delta >= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return 1.0 / self.values.size

    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def mean(self) -> float:
        return math.fsum(self.values) / self.n_cells

    def to_profile(self) -> Profile:
        return Profile.periodic(np.arange(self.n_cells) * self.dx, self.values)

    @classmethod
    def from_profile(cls, p: Profile, n_cells: int, eps: float, delta: float,
                     pair: SmoothFluxPair) -> "ViscousField":
        """Exact cell averages of a periodic profile."""
        if not p.is_periodic:
            raise ValueError("viscous fields are periodic")
        edges = np.arange(n_cells + 1) / n_cells
        lo, hi, v = p.cells()
        # cumulative integral of the profile, evaluated at the grid edges
        knots = np.concatenate((lo, [hi[-1]]))
        cum = np.concatenate(([0.0], np.cumsum((hi - lo) * v)))
        shift = knots[0]
        x = np.where(edges < shift, edges + 1.0, edges)
        prim = np.interp(x, knots, cum)
        prim = np.where(edges < shift, prim - cum[-1], prim)
        avg = np.diff(prim) * n_cells
        return cls(avg, eps, delta, pair)


def _range_constants(field: ViscousField):
    u = field.values
    lo, hi = float(np.min(u)), float(np.max(u))
    grid = np.linspace(lo, hi, 257) if hi > lo else np.array([lo])
    gap = float(np.max(field.pair.gap(grid)))
    lam = max_wave_speed(field.pair, max(abs(lo), abs(hi)))
    return gap, lam


def cfl_dt(field: ViscousField) -> float:
    """Stable step: 0.4 dx^2 / (delta + max_gap * max_theta' / eps + dx * lambda)."""
    gap, lam = _range_constants(field)
    dx = field.dx
    denom = field.delta + gap * SwitchFunction.MAX_SLOPE / field.eps + dx * lam
    return CFL_SAFETY * dx * dx / denom


def monotone_condition(field: ViscousField) -> bool:
    """True when ``delta >= dx * lambda / 2``.

    Where ``|D| > eps`` the switch adds no diffusion, so the central
    interface flux is monotone only if ``delta`` alone dominates the cell
    scale advection.  Together with ``cfl_dt`` this gives the comparison
    and maximum principles.
    """
    _, lam = _range_constants(field)
    return field.delta >= 0.5 * field.dx * lam


def _padded(coef):
    if coef is None or len(coef) > _NCOEF:
        return None
    out = np.zeros(_NCOEF)
    out[:len(coef)] = coef
    return out


def _kernel_coefs(pair: SmoothFluxPair):
    if not backend.is_compiled(backend.core):
        return None
    fc, gc = _padded(pair.f_coef), _padded(pair.g_coef)
    if fc is None or gc is None:
        return None
    return fc, gc


def _numpy_steps(u, lo, nsteps, dt, field: ViscousField):
    """Vectorized twin of the compiled kernel (same compensated update)."""
    dx = field.dx
    r = dt / dx
    cd = field.delta * dt / (dx * dx)
    sw = SwitchFunction(field.eps)
    pair = field.pair
    for it in range(nsteps):
        right = np.roll(u, -1)
        th = sw.value((right - u) / dx)
        ub = 0.5 * (u + right)
        phi = r * (th * pair.f(ub) + (1.0 - th) * pair.g(ub)) - cd * (right - u)
        inc = (np.roll(phi, 1) - phi) - lo
        new = u + inc
        lo[:] = (new - u) - inc
        u[:] = new
        if not np.all(np.isfinite(u)):
            return -(it + 1)
    return nsteps


def _run_steps(field: ViscousField, u, lo, nsteps: int, dt: float) -> int:
    coefs = _kernel_coefs(field.pair)
    if coefs is None:
        return _numpy_steps(u, lo, nsteps, dt, field)
    return backend.core.visc_steps(u, lo, nsteps, dt, field.dx, field.eps, field.delta,
                                   coefs[0], coefs[1])


def _advance(field: ViscousField, t_target: float, dt_max: float, u, lo):
    span = t_target - field.time
    if span <= 0:
        return field, 0
    nsteps = max(1, int(math.ceil(span / dt_max * (1.0 - 1e-12))))
    dt = span / nsteps
    done = _run_steps(field, u, lo, nsteps, dt)
    if done < 0:
        reached = field.steps - done
        raise ViscousBlowUp(f"non-finite values after {reached} steps", reached)
    return replace(field, values=u.copy(), time=t_target, steps=field.steps + nsteps), nsteps


def step(field: ViscousField) -> ViscousField:
    """One explicit step of size ``cfl_dt(field)``."""
    dt = cfl_dt(field)
    u = np.ascontiguousarray(field.values, dtype=float).copy()
    lo = np.zeros_like(u)
    if _run_steps(field, u, lo, 1, dt) < 0:
        raise ViscousBlowUp(f"non-finite values after {field.steps + 1} steps", field.steps + 1)
    return replace(field, values=u, time=field.time + dt, steps=field.steps + 1)


def solve_to(field: ViscousField, T: float, sample_times=(), *,
             dt_max: float | None = None) -> list[ViscousField]:
    """Fields at each sample time (and at ``T``), steps shrunk to land on them exactly.

    The step bound defaults to ``cfl_dt`` of the initial data; under
    ``monotone_condition`` the maximum principle keeps it valid for the
    whole run.  A smaller ``dt_max`` lets two runs share one step size.
    """
    if T < field.time:
        raise ValueError("T must be >= field.time")
    targets = sorted({float(t) for t in sample_times if field.time <= t <= T} | {float(T)})
    if dt_max is None:
        dt_max = cfl_dt(field)
    elif not dt_max > 0:
        raise ValueError("dt_max must be positive")
    u = np.ascontiguousarray(field.values, dtype=float).copy()
    lo = np.zeros_like(u)
    out = []
    cur = field
    for t in targets:
        cur, _ = _advance(cur, t, dt_max, u, lo)
        out.append(cur)
    return out
