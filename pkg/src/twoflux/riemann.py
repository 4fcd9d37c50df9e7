"""Two-flux Riemann solver: upward jumps use f, downward jumps use g."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .flux import PiecewiseAffineFlux, lower_convex_envelope, upper_concave_envelope


class Family(str, Enum):
    F = "F"
    G = "G"


class RiemannError(RuntimeError):
    """Internal invariant violated while building a fan."""


@dataclass(frozen=True)
class Front:
    position: float
    speed: float
    u_left: float
    u_right: float
    family: Family

    @property
    def strength(self) -> float:
        return abs(self.u_right - self.u_left)


def solve(u_l: float, u_r: float, f_nu: PiecewiseAffineFlux, g_nu: PiecewiseAffineFlux,
          x0: float = 0.0, sigma: float = 0.0) -> list[Front]:
    """Fan of admissible fronts for the jump ``u_l -> u_r`` placed at ``x0``.

    ``u_l < u_r`` follows the convex minorant of ``f_nu`` and yields F-fronts;
    ``u_l > u_r`` follows the concave majorant of ``g_nu`` and yields
    G-fronts.  Speeds increase strictly from left to right.  Grid nodes
    within ``sigma`` of an end state are ignored so no sub-``sigma`` front
    is created.
    """
    if u_l == u_r:
        return []
    if u_l < u_r:
        segs, fam = lower_convex_envelope(f_nu, u_l, u_r, sigma), Family.F
    else:
        segs, fam = upper_concave_envelope(g_nu, u_l, u_r, sigma), Family.G
    fronts = [Front(float(x0), s.slope, s.u_from, s.u_to, fam) for s in segs]
    for a, b in zip(fronts, fronts[1:]):
        if not b.speed > a.speed:
            raise RiemannError(f"fan speeds not increasing: {a.speed!r} then {b.speed!r}")
    return fronts
