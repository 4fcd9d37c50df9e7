"""Scenario configuration and the catalog of initial data."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .flux import FLUX_CATALOG, FluxError, SmoothFluxPair, catalog_pair
from .profile import Profile, Topology


class ConfigError(ValueError):
    """Invalid scenario configuration."""


INITIAL_KINDS = ("square_wave", "staircase", "random_piecewise", "exp_peak", "custom")
# older config files name the exponential peak by its catalog number
KIND_ALIASES = {"example31": "exp_peak"}


# -- initial data -----------------------------------------------------------

def square_wave(topology: str = "line", height: float = 1.0, low: float = 0.0,
                start: float = 0.0, width: float = 1.0) -> Profile:
    """Line: ``height`` on ``[start, start + width)``.  Periodic: ``height`` then ``low`` over half periods."""
    if Topology(topology) is Topology.PERIODIC:
        return Profile.periodic([0.0, 0.5], [height, low])
    return Profile.line([start, start + width], [height])


def staircase(topology: str = "line", steps: int = 4, height: float = 1.0,
              start: float = 0.0, width: float = 1.0) -> Profile:
    """``steps`` equal rising steps up to ``height`` over ``[start, start + width)``."""
    if steps < 1:
        raise ConfigError("staircase needs at least one step")
    vals = height * np.arange(1, steps + 1) / steps
    if Topology(topology) is Topology.PERIODIC:
        return Profile.periodic(np.arange(steps) / steps, vals)
    return Profile.line(start + width * np.arange(steps + 1) / steps, vals)


def random_piecewise(seed: int, n_jumps: int = 20, amplitude: float = 1.0,
                     topology: str = "periodic", min_jumps: int = 2,
                     length: float = 1.0) -> Profile:
    """Between ``min_jumps`` and ``n_jumps`` uniform breakpoints, values uniform in ``[-amplitude, amplitude]``.

    Line data is supported in ``[0, length]``; periodic data ignores ``length``.
    """
    rng = np.random.default_rng(seed)
    return random_profile(rng, n_jumps, amplitude, topology, min_jumps, length)


def random_profile(rng: np.random.Generator, n_jumps: int = 20, amplitude: float = 1.0,
                   topology: str = "periodic", min_jumps: int = 2,
                   length: float = 1.0) -> Profile:
    m = int(rng.integers(min_jumps, n_jumps + 1))
    if Topology(topology) is Topology.PERIODIC:
        return Profile.periodic(np.sort(rng.uniform(0.0, 1.0, m)),
                                rng.uniform(-amplitude, amplitude, m))
    b = np.sort(rng.uniform(0.0, length, m))
    return Profile.line(b, rng.uniform(-amplitude, amplitude, m - 1))


def random_increment(rng: np.random.Generator, base: Profile, n_jumps: int = 10,
                     amplitude: float = 0.5) -> Profile:
    """``base`` plus a random non-negative step function (same topology)."""
    m = int(rng.integers(1, n_jumps + 1))
    if base.is_periodic:
        inc = Profile.periodic(np.sort(rng.uniform(0.0, 1.0, m)), rng.uniform(0.0, amplitude, m))
        b = np.union1d(base.breakpoints, inc.breakpoints)
        return Profile.periodic(b, base.evaluate(b) + inc.evaluate(b))
    lo, hi = base.breakpoints[0], base.breakpoints[-1]
    ib = np.sort(rng.uniform(lo, hi, m + 1))
    inc = Profile.line(ib, rng.uniform(0.0, amplitude, m))
    b = np.union1d(base.breakpoints, inc.breakpoints)
    mids = 0.5 * (b[:-1] + b[1:])
    return Profile.line(b, base.evaluate(mids) + inc.evaluate(mids))


def exp_peak(nu: int, half_width: float = 5.0) -> Profile:
    """``e^x`` for ``x < 0`` and ``-e^-x`` for ``x > 0`` on ``[-R, R]``, truncated toward zero onto ``2**-nu Z``.

    The truncated function is a step function with breakpoints at
    ``+-log(k 2**-nu)``, built exactly rather than sampled.
    """
    scale = 2.0 ** nu
    ks = np.arange(int(math.floor(math.exp(-half_width) * scale)), int(scale))
    left = np.concatenate(([-half_width], np.log(ks[1:] / scale), [0.0]))
    b = np.concatenate((left, -left[::-1][1:]))
    vals = np.concatenate((ks / scale, -ks[::-1] / scale))
    return Profile.line(b, vals).normalized()


def exp_peak_entropy(x, t: float, half_width: float = 5.0):
    """Entropy solution of Burgers' equation for the untruncated example data, valid for
    ``|x| <= half_width - t`` (away from the truncation edges): a stationary shock at 0
    with characteristics ``x = xi + u0(xi) t`` on each side.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        if xv < 0:
            xi = optimize.brentq(lambda z: z + math.exp(z) * t - xv, xv - t - 1.0, 0.0,
                                 xtol=1e-15, rtol=1e-15)
            out[i] = math.exp(xi)
        elif xv > 0:
            xi = optimize.brentq(lambda z: z - math.exp(-z) * t - xv, 0.0, xv + t + 1.0,
                                 xtol=1e-15, rtol=1e-15)
            out[i] = -math.exp(-xi)
        else:
            out[i] = 0.0
    return out if np.ndim(x) else float(out[0])


def top_plateau_width(p: Profile) -> float:
    """Width of the widest cell attaining the maximum value (0 if the maximum is not a strict extremum)."""
    lo, hi, v = p.cells()
    vmax = float(np.max(v))
    best = 0.0
    for i in np.flatnonzero(v == vmax):
        left = v[i - 1] if (i > 0 or p.is_periodic) else 0.0
        right = v[(i + 1) % v.size] if (i + 1 < v.size or p.is_periodic) else 0.0
        if vmax > left and vmax > right:
            best = max(best, float(hi[i] - lo[i]))
    return best


def level_set_width(fn, lo: float, hi: float, level: float, samples: int = 200001) -> float:
    """Measure of ``{x in [lo, hi] : fn(x) >= level}`` on a uniform grid."""
    x = np.linspace(lo, hi, samples)
    return float(np.count_nonzero(fn(x) >= level)) * (hi - lo) / (samples - 1)


# -- configuration ----------------------------------------------------------

DEFAULTS = {
    "name": "scenario",
    "flux": {"name": "constant_gap", "gap": 1.0, "params": {}, "u_range": [-2.0, 2.0]},
    "initial": {"kind": "square_wave"},
    "topology": "line",
    "nu": 10,
    "nus": None,
    "T": 1.0,
    "sample_times": None,
    "n_samples": 10,
    "seed": 0,
    "log_events": True,
    "viscous": {"ladder": [], "n_cells": 1024, "times": []},
    "properties": {"trials": 50, "nu": 6, "n_jumps": 20, "amplitude": 1.0, "T": 1.0,
                   "n_samples": 20, "mutate": False},
}

_TOP_KEYS = set(DEFAULTS) | {"output"}
_SUB_KEYS = {"flux": set(DEFAULTS["flux"]), "viscous": set(DEFAULTS["viscous"]),
             "properties": set(DEFAULTS["properties"])}
_INITIAL_KEYS = {
    "square_wave": {"height", "low", "start", "width"},
    "staircase": {"steps", "height", "start", "width"},
    "random_piecewise": {"seed", "n_jumps", "amplitude", "min_jumps", "length"},
    "exp_peak": {"half_width"},
    "custom": {"breakpoints", "values"},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "initial":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _need(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _number(x, name: str, *, positive=False, nonneg=False) -> float:
    _need(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x),
          f"{name} must be a finite number")
    _need(not positive or x > 0, f"{name} must be positive")
    _need(not nonneg or x >= 0, f"{name} must be non-negative")
    return float(x)


def _integer(x, name: str, lo: int | None = None) -> int:
    _need(isinstance(x, int) and not isinstance(x, bool), f"{name} must be an integer")
    _need(lo is None or x >= lo, f"{name} must be >= {lo}")
    return int(x)


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated, fully resolved scenario (defaults filled in)."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        _need(isinstance(raw, dict), "config must be a JSON object")
        unknown = set(raw) - _TOP_KEYS
        _need(not unknown, f"unknown config keys: {sorted(unknown)}")
        for key, allowed in _SUB_KEYS.items():
            if key in raw:
                _need(isinstance(raw[key], dict), f"'{key}' must be an object")
                bad = set(raw[key]) - allowed
                _need(not bad, f"unknown keys in '{key}': {sorted(bad)}")
        cfg = _merge(DEFAULTS, raw)
        cls._validate(cfg)
        return cls(cfg)

    @staticmethod
    def _validate(cfg: dict):
        fl = cfg["flux"]
        _need(fl.get("name") in FLUX_CATALOG, f"flux.name must be one of {list(FLUX_CATALOG)}")
        _number(fl["gap"], "flux.gap", positive=True)
        _need(isinstance(fl["params"], dict), "flux.params must be an object")
        ur = fl["u_range"]
        _need(isinstance(ur, list) and len(ur) == 2 and ur[0] < ur[1], "flux.u_range must be [lo, hi]")
        _need(cfg["topology"] in ("line", "periodic"), "topology must be 'line' or 'periodic'")
        _integer(cfg["nu"], "nu", 1)
        if cfg["nus"] is not None:
            _need(isinstance(cfg["nus"], list) and len(cfg["nus"]) >= 1, "nus must be a non-empty list")
            for n in cfg["nus"]:
                _integer(n, "nus entry", 1)
            _need(cfg["nus"] == sorted(set(cfg["nus"])), "nus must be strictly increasing")
        T = _number(cfg["T"], "T", nonneg=True)
        if cfg["sample_times"] is not None:
            _need(isinstance(cfg["sample_times"], list), "sample_times must be a list")
            for t in cfg["sample_times"]:
                _need(0 <= _number(t, "sample time") <= T, "sample times must lie in [0, T]")
        _integer(cfg["n_samples"], "n_samples", 1)
        _integer(cfg["seed"], "seed", 0)
        init = cfg["initial"]
        if isinstance(init, dict) and init.get("kind") in KIND_ALIASES:
            init["kind"] = KIND_ALIASES[init["kind"]]
        _need(isinstance(init, dict) and init.get("kind") in INITIAL_KINDS,
              f"initial.kind must be one of {list(INITIAL_KINDS)}")
        bad = set(init) - {"kind"} - _INITIAL_KEYS[init["kind"]]
        _need(not bad, f"unknown keys for initial data '{init['kind']}': {sorted(bad)}")
        if init["kind"] == "random_piecewise":
            _need("seed" in init, "random_piecewise needs an explicit seed")
            _integer(init["seed"], "initial.seed", 0)
        if init["kind"] == "custom":
            _need("breakpoints" in init and "values" in init,
                  "custom initial data needs breakpoints and values")
        if init["kind"] == "exp_peak":
            _need(cfg["topology"] == "line", "exp_peak data live on the line")
        vis = cfg["viscous"]
        _need(isinstance(vis["ladder"], list), "viscous.ladder must be a list of [eps, delta]")
        for rung in vis["ladder"]:
            _need(isinstance(rung, list) and len(rung) == 2, "each viscous rung is [eps, delta]")
            _number(rung[0], "eps", positive=True)
            _number(rung[1], "delta", nonneg=True)
        _integer(vis["n_cells"], "viscous.n_cells", 2)
        for t in vis["times"]:
            _need(0 <= _number(t, "viscous time") <= T, "viscous times must lie in [0, T]")
        pr = cfg["properties"]
        _integer(pr["trials"], "properties.trials", 0)
        _integer(pr["nu"], "properties.nu", 1)
        _integer(pr["n_jumps"], "properties.n_jumps", 2)
        _number(pr["amplitude"], "properties.amplitude", positive=True)
        _number(pr["T"], "properties.T", positive=True)
        _integer(pr["n_samples"], "properties.n_samples", 1)
        _need(isinstance(pr["mutate"], bool), "properties.mutate must be true or false")

    # -- accessors --------------------------------------------------------

    def __getitem__(self, key):
        return self.data[key]

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def pair(self) -> SmoothFluxPair:
        fl = self.data["flux"]
        try:
            return catalog_pair(fl["name"], gap=fl["gap"], u_range=tuple(fl["u_range"]),
                                **fl["params"])
        except (FluxError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def sample_times(self) -> list[float]:
        T = float(self.data["T"])
        if self.data["sample_times"] is not None:
            return sorted({float(t) for t in self.data["sample_times"]} | {T})
        n = self.data["n_samples"]
        return [T * (i + 1) / n for i in range(n)]

    def nus(self) -> list[int]:
        return list(self.data["nus"]) if self.data["nus"] is not None else [self.data["nu"]]

    def initial(self) -> Profile:
        init = dict(self.data["initial"])
        kind = init.pop("kind")
        topo = self.data["topology"]
        try:
            if kind == "square_wave":
                return square_wave(topo, **init)
            if kind == "staircase":
                return staircase(topo, **init)
            if kind == "random_piecewise":
                return random_piecewise(topology=topo, **init)
            if kind == "exp_peak":
                return exp_peak(max(self.nus()), **init)
            if Topology(topo) is Topology.PERIODIC:
                return Profile.periodic(init["breakpoints"], init["values"])
            return Profile.line(init["breakpoints"], init["values"])
        except ValueError as exc:
            raise ConfigError(f"initial data: {exc}") from exc


def apply_overrides(raw: dict, assignments) -> dict:
    """Apply ``key.sub=value`` strings; values parse as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: '{part}' is not an object")
        node[parts[-1]] = value
    return out


def load_config(path=None, overrides=()) -> ScenarioConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(apply_overrides(raw, overrides))
