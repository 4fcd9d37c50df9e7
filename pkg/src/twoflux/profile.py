"""Piecewise-constant profiles on a line (compact support) or a unit circle."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Topology(str, Enum):
    LINE = "line"
    PERIODIC = "periodic"


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Profile:
    """Sorted breakpoints and one value per cell.

    Line: ``len(values) == len(breakpoints) - 1``; cell i is
    ``[b_i, b_{i+1})`` and the profile is zero outside ``[b_0, b_last)``.
    Periodic (period 1): ``len(values) == len(breakpoints)``, breakpoints lie
    in ``[0, 1)``, cell i is ``[b_i, b_{i+1})`` and the last cell wraps to
    ``b_0 + 1``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    topology: Topology = Topology.LINE

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        topo = Topology(self.topology)
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(v))):
            raise ProfileError("profile contains non-finite numbers")
        if b.size > 1 and np.any(np.diff(b) <= 0):
            raise ProfileError("breakpoints must be strictly increasing")
        if topo is Topology.LINE:
            if v.size < 1 or b.size != v.size + 1:
                raise ProfileError("line profile needs len(breakpoints) == len(values) + 1 >= 2")
        else:
            if v.size < 1 or b.size != v.size:
                raise ProfileError("periodic profile needs len(breakpoints) == len(values) >= 1")
            if b[0] < 0.0 or b[-1] >= 1.0:
                raise ProfileError("periodic breakpoints must lie in [0, 1)")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "topology", topo)

    # -- constructors ---------------------------------------------------

    @classmethod
    def line(cls, breakpoints, values) -> "Profile":
        return cls(breakpoints, values, Topology.LINE)

    @classmethod
    def periodic(cls, breakpoints, values) -> "Profile":
        return cls(breakpoints, values, Topology.PERIODIC)

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls([0.0], [value], Topology.PERIODIC)

    @classmethod
    def from_jumps(cls, px, pw, topology, support=(0.0, 1.0)) -> "Profile":
        """Inverse of :meth:`to_jumps`; an empty line jump list is one zero cell on ``support``."""
        px = np.asarray(px, dtype=float)
        pw = np.asarray(pw, dtype=float)
        m = px.size
        if Topology(topology) is Topology.LINE:
            if m == 0:
                return cls.line(list(support), [0.0])
            return cls.line(px, pw[1:m])
        if m == 0:
            return cls.constant(float(pw[0]))
        return cls.periodic(px, np.roll(pw[:m], -1))

    # -- views ------------------------------------------------------------

    @property
    def is_periodic(self) -> bool:
        return self.topology is Topology.PERIODIC

    @property
    def n_cells(self) -> int:
        return self.values.size

    def cells(self):
        """``(left, right, value)`` arrays; periodic cells end at most at ``b_0 + 1``."""
        b, v = self.breakpoints, self.values
        if self.is_periodic:
            right = np.append(b[1:], b[0] + 1.0)
            return b.copy(), right, v.copy()
        return b[:-1].copy(), b[1:].copy(), v.copy()

    def widths(self) -> np.ndarray:
        lo, hi, _ = self.cells()
        return hi - lo

    def to_jumps(self):
        """Jump positions and the value left of each jump (plus the final right value on a line).

        Cells with equal neighbours are merged, so every returned jump is a
        real discontinuity.
        """
        b, v = self.breakpoints, self.values
        if self.is_periodic:
            left = np.roll(v, 1)
            keep = left != v
            px = b[keep]
            pw = left[keep]
            if px.size == 0:
                return px, np.array([v[0]])
            return px, pw
        full = np.concatenate(([0.0], v, [0.0]))
        keep = full[:-1] != full[1:]
        px = b[keep]
        pw = np.concatenate((full[:-1][keep], [0.0]))
        return px, pw

    def normalized(self) -> "Profile":
        """Same function with equal neighbours merged and zero cells trimmed from a line."""
        px, pw = self.to_jumps()
        lo, hi = (self.breakpoints[0], self.breakpoints[-1]) if not self.is_periodic else (0.0, 1.0)
        return Profile.from_jumps(px, pw, self.topology, support=(lo, hi))

    def evaluate(self, x):
        """Right-continuous point values."""
        xs = np.asarray(x, dtype=float)
        b, v = self.breakpoints, self.values
        if self.is_periodic:
            xm = np.mod(xs, 1.0)
            idx = np.searchsorted(b, xm, side="right") - 1
            out = v[np.mod(idx, v.size)]
        else:
            idx = np.searchsorted(b, xs, side="right") - 1
            inside = (idx >= 0) & (idx < v.size)
            out = np.where(inside, v[np.clip(idx, 0, v.size - 1)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def support(self) -> tuple[float, float]:
        if self.is_periodic:
            return 0.0, 1.0
        nz = np.flatnonzero(self.values != 0.0)
        if nz.size == 0:
            return float(self.breakpoints[0]), float(self.breakpoints[0])
        return float(self.breakpoints[nz[0]]), float(self.breakpoints[nz[-1] + 1])

    def map_values(self, fn) -> "Profile":
        return Profile(self.breakpoints, fn(self.values), self.topology)

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def to_dict(self) -> dict:
        return {"topology": self.topology.value,
                "breakpoints": [float(b) for b in self.breakpoints],
                "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        return cls(d["breakpoints"], d["values"], Topology(d.get("topology", "line")))
