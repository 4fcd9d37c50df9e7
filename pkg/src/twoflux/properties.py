"""Randomized property trials for the front-tracking semigroup.

Each trial draws periodic data ``u``, independent data ``v`` and an upper
neighbour ``w = u + (non-negative steps)``, runs all three, and measures a
signed margin per property (negative means violated).  Line data are drawn
separately for the extinction check.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from . import semigroup as sg
from .flux import SmoothFluxPair
from .scenarios import random_increment, random_profile

CONTRACTION_TOL = 1e-8
ORDER_TOL = 1e-10
MONOTONE_TOL = 1e-10
PLATEAU_SLACK = 1e-6
MAX_RESTARTS = 100_000
EXTINCTION_DELAY = 1e-9
AVERAGE_TOL = 1e-8

PROPERTIES = ("contraction", "comparison", "tv_monotone", "linf_monotone", "front_bound",
              "restart_bound", "plateau_width", "extinction", "averaging")


@dataclass(frozen=True)
class TrialSpec:
    seed: int
    index: int
    nu: int
    T: float
    n_jumps: int = 20
    amplitude: float = 1.0
    n_samples: int = 20
    mutate: bool = False
    extras: bool = True

    def times(self) -> list[float]:
        return [self.T * (i + 1) / self.n_samples for i in range(self.n_samples)]


@dataclass
class TrialResult:
    index: int
    margins: dict
    details: dict = field(default_factory=dict)

    def failed(self) -> list[str]:
        return [k for k, m in self.margins.items() if not m >= 0.0]


def _gap_floor(run: sg.SemigroupRun) -> float:
    f_nu, g_nu = run.fluxes
    return float(np.min(g_nu.values - f_nu.values))


def _monotone_margins(runs, margins):
    for name in ("tv", "linf"):
        worst = math.inf
        for r in runs:
            series = [_initial_norm(r, name)] + getattr(r.report, name)
            worst = min(worst, dg.nonincreasing_verdict(name, series, MONOTONE_TOL).margin)
        margins[f"{name}_monotone"] = worst + MONOTONE_TOL


def _initial_norm(r: sg.SemigroupRun, name: str) -> float:
    return dg.tot_var(r.quantized) if name == "tv" else dg.linf(r.quantized)


def _plateau_margin(r: sg.SemigroupRun) -> float:
    if r.initial_min_width is None:
        return math.inf
    m = dg.linf(r.quantized)
    v = dg.plateau_bound_check(r.report.times, r.report.min_plateau_width, r.initial_min_width,
                               r.lam, m, _gap_floor(r), slack=PLATEAU_SLACK)
    return v.margin


def run_trial(spec: TrialSpec, pair: SmoothFluxPair) -> TrialResult:
    rng = np.random.default_rng([spec.seed, spec.index])
    u0 = random_profile(rng, spec.n_jumps, spec.amplitude, "periodic")
    v0 = random_profile(rng, spec.n_jumps, spec.amplitude, "periodic")
    w0 = random_increment(rng, u0, spec.n_jumps // 2, 0.5 * spec.amplitude)
    times = spec.times()
    kw = dict(mutate=spec.mutate, restart_cap=MAX_RESTARTS)
    ru = sg.run(spec.nu, u0, pair, spec.T, times, **kw)
    rv = sg.run(spec.nu, v0, pair, spec.T, times, **kw)
    rw = sg.run(spec.nu, w0, pair, spec.T, times, **kw)
    margins, details = {}, {}

    # contraction for the independent pair and for the ordered neighbour
    worst = math.inf
    for name, ra, rb in (("independent", ru, rv), ("ordered", ru, rw)):
        d0 = dg.l1_distance(ra.quantized, rb.quantized)
        dmax = max(dg.l1_distance(a, b) for a, b in zip(ra.profiles, rb.profiles))
        worst = min(worst, d0 + CONTRACTION_TOL - dmax)
        details[f"contraction_{name}"] = {"initial": d0, "max": dmax}
    margins["contraction"] = worst

    viol = max(dg.ordering_violation(a, b) for a, b in zip(ru.profiles, rw.profiles))
    margins["comparison"] = ORDER_TOL - viol

    runs = (ru, rv, rw)
    _monotone_margins(runs, margins)
    margins["front_bound"] = min(r.front_bound() - r.stats.max_fronts for r in runs)
    margins["restart_bound"] = float(min(MAX_RESTARTS - r.stats.restarts for r in runs))
    margins["plateau_width"] = min(_plateau_margin(r) for r in runs)
    details["max_restarts"] = max(r.stats.restarts for r in runs)

    if spec.extras:
        # extinction on the line: zero once t >= ||u||_1 / c0
        line0 = random_profile(rng, spec.n_jumps, spec.amplitude, "line")
        q = sg.quantize_initial(line0, spec.nu)
        probe = sg.run(spec.nu, line0, pair, 0.0, **kw)
        t_ext = dg.l1_norm(q) / _gap_floor(probe) + EXTINCTION_DELAY
        re = sg.run(spec.nu, line0, pair, t_ext, **kw)
        margins["extinction"] = 0.0 if re.final.is_zero() else -dg.l1_norm(re.final)
        # periodic averaging: constant mean once t >= ||u||_inf / c0
        t_avg = dg.linf(ru.quantized) / _gap_floor(ru)
        ra = sg.run(spec.nu, u0, pair, t_avg, **kw)
        mean = dg.mass(ru.quantized)
        err = float(np.max(np.abs(ra.final.values - mean)))
        margins["averaging"] = AVERAGE_TOL - err if ra.final.n_cells == 1 else -max(err, 1e-300)
    return TrialResult(spec.index, margins, details)


def _trial_task(args):
    spec, pair = args
    return run_trial(spec, pair)


@dataclass
class PropertySummary:
    trials: list

    def worst(self) -> dict:
        out = {}
        for name in PROPERTIES:
            vals = [t.margins[name] for t in self.trials if name in t.margins]
            if vals:
                out[name] = min(vals)
        return out

    def failures(self) -> dict:
        out = {}
        for t in self.trials:
            for name in t.failed():
                out.setdefault(name, []).append(t.index)
        return out

    @property
    def passed(self) -> bool:
        return not self.failures()

    def table(self):
        """Rows ``(property, trials, failures, worst_margin)``."""
        fails = self.failures()
        for name, w in self.worst().items():
            n = sum(1 for t in self.trials if name in t.margins)
            yield (name, n, len(fails.get(name, ())), w)


def run_trials(specs, pair: SmoothFluxPair, *, jobs: int = 1) -> PropertySummary:
    specs = list(specs)
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_trial_task, [(s, pair) for s in specs]))
    else:
        results = [run_trial(s, pair) for s in specs]
    return PropertySummary(sorted(results, key=lambda r: r.index))
