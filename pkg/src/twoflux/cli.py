"""Command-line entry point: ``twoflux {run,compare,properties,converge}``.

Exit codes: 0 pass, 1 invariant violation, 2 config error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagnostics as dg
from . import properties as props
from . import semigroup as sg
from . import tracker
from .flux import FluxError
from .output import (FIELD_COLUMNS, LADDER_COLUMNS, PLATEAU_COLUMNS, PROFILE_COLUMNS,
                     SERIES_COLUMNS, VISCOUS_COLUMNS, OutputDir, profile_rows)
from .profile import ProfileError
from .scenarios import ConfigError, ScenarioConfig, load_config
from .viscous import ViscousBlowUp, ViscousField, solve_to

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3

MONOTONE_TOL = 1e-10
MASS_TOL = 1e-9
VISCOUS_MEAN_TOL = 1e-13
VISCOUS_BOUND_TOL = 1e-12

log = logging.getLogger("twoflux")


# -- run ----------------------------------------------------------------------

def _run_verdicts(r: sg.SemigroupRun) -> list:
    rep = r.report
    out = rep.check_monotone(MONOTONE_TOL)
    out.append(dg.nonincreasing_verdict("l1", rep.l1, MONOTONE_TOL))
    if r.quantized.is_periodic:
        m0 = rep.mass[0]
        drift = max(abs(m - m0) for m in rep.mass)
        tol = MASS_TOL * max(1.0, abs(m0))
        out.append(dg.Verdict("mass", drift <= tol, tol - drift, f"max drift {drift:.3e}"))
    rep.verdicts = out
    return out


def cmd_run(cfg: ScenarioConfig, out: OutputDir, jobs: int) -> int:
    pair = cfg.pair()
    T = float(cfg["T"])
    times = [0.0] + [t for t in cfg.sample_times() if t > 0.0]
    r = sg.run(cfg["nu"], cfg.initial(), pair, T, times, log_events=cfg["log_events"])
    verdicts = _run_verdicts(r)

    out.csv("profiles.csv", PROFILE_COLUMNS,
            (row for t, p in zip(r.sample_times, r.profiles) for row in profile_rows(t, p)))
    out.csv("series.csv", SERIES_COLUMNS, r.report.rows())
    out.csv("plateaus.csv", PLATEAU_COLUMNS,
            ((t, pl.kind.value, pl.x_left, pl.x_right, pl.u_hat)
             for t, pls in zip(r.sample_times, r.plateaus) for pl in pls))
    out.jsonl("events.jsonl", (e.to_dict() for e in r.events))
    out.json("report.json", {
        "command": "run", "config": cfg.data, "nu": r.nu, "T": T,
        "quantized_initial": r.quantized.to_dict(), "stats": r.stats.to_dict(),
        "front_bound": r.front_bound(), "report": r.report.to_dict()})
    _print_verdicts(verdicts)
    print(f"fronts max {r.stats.max_fronts} (bound {r.front_bound():g}), "
          f"restarts {r.stats.restarts}")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VIOLATION


def _print_verdicts(verdicts):
    for v in verdicts:
        state = "PASS" if v.passed else "FAIL"
        print(f"{state}  {v.name:<14} margin {v.margin:.3e}  {v.detail}".rstrip())


# -- viscous ladders (shared by compare and converge) -------------------------------

def _viscous_task(args):
    p, pair, eps, delta, n_cells, T, times = args
    f0 = ViscousField.from_profile(p, n_cells, eps, delta, pair)
    fields = solve_to(f0, T, times)
    return f0, fields


def _viscous_ladder(cfg: ScenarioConfig, p, pair, T, times, reference_at, jobs):
    """Rows per rung and time, plus invariant verdicts; ``reference_at(t)`` is the semigroup profile."""
    if not p.is_periodic:
        raise ConfigError("viscous ladders need periodic topology")
    n_cells = cfg["viscous"]["n_cells"]
    tasks = [(p, pair, float(e), float(d), n_cells, T, times) for e, d in cfg["viscous"]["ladder"]]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_viscous_task, tasks))
    else:
        results = [_viscous_task(t) for t in tasks]
    lo, hi = float(np.min(p.values)), float(np.max(p.values))
    scale = max(abs(lo), abs(hi), 1e-300)
    rows, finals, field_rows = [], [], []
    mean_err = bound_err = 0.0
    for (f0, fields) in results:
        m0 = f0.mean()
        for f in fields:
            d = dg.l1_distance(f, reference_at(f.time))
            rows.append((f.eps, f.delta, f.n_cells, f.time, d))
            mean_err = max(mean_err, abs(f.mean() - m0) / max(abs(m0), scale))
            bound_err = max(bound_err, lo - float(np.min(f.values)),
                            float(np.max(f.values)) - hi)
        last = fields[-1]
        finals.append(rows[-1][4])
        field_rows.extend((last.eps, last.delta, last.n_cells, last.time, x, v)
                          for x, v in zip(last.centers(), last.values))
    verdicts = [
        dg.Verdict("viscous_mean", mean_err <= VISCOUS_MEAN_TOL, VISCOUS_MEAN_TOL - mean_err,
                   f"max relative drift {mean_err:.3e}"),
        dg.Verdict("viscous_bounds", bound_err <= VISCOUS_BOUND_TOL,
                   VISCOUS_BOUND_TOL - bound_err, f"max excursion {bound_err:.3e}"),
    ]
    return rows, finals, field_rows, verdicts


def ladder_verdict(distances) -> dict:
    """Convergence verdict for distances along the ladder (none for a single rung)."""
    if len(distances) < 2:
        return {"verdict": None, "decreasing": None, "halved": None}
    dec = all(b < a for a, b in zip(distances, distances[1:]))
    halved = distances[-1] < 0.5 * distances[0]
    return {"verdict": "converging" if dec else "not converged", "decreasing": dec,
            "halved": halved}


# -- compare ------------------------------------------------------------------

def cmd_compare(cfg: ScenarioConfig, out: OutputDir, jobs: int) -> int:
    if cfg["topology"] != "periodic":
        raise ConfigError("compare needs periodic topology")
    if not cfg["viscous"]["ladder"]:
        raise ConfigError("compare needs a non-empty viscous.ladder")
    pair = cfg.pair()
    T = float(cfg["T"])
    p = cfg.initial()
    times = sorted({float(t) for t in cfg["viscous"]["times"]} | {T})
    ref = sg.run(cfg["nu"], p, pair, T, times)
    by_time = dict(zip(ref.sample_times, ref.profiles))
    rows, finals, field_rows, verdicts = _viscous_ladder(cfg, p, pair, T, times,
                                                         by_time.__getitem__, jobs)
    lv = ladder_verdict(finals)
    out.csv("viscous_distances.csv", VISCOUS_COLUMNS, rows)
    out.csv("viscous_fields.csv", FIELD_COLUMNS, field_rows)
    out.csv("profiles.csv", PROFILE_COLUMNS,
            (row for t, q in zip(ref.sample_times, ref.profiles) for row in profile_rows(t, q)))
    out.json("compare.json", {
        "command": "compare", "config": cfg.data, "nu": cfg["nu"], "T": T,
        "distances": {f"eps={r[0]!r},delta={r[1]!r},n_cells={r[2]}": r[4]
                      for r in rows if r[3] == T},
        "ladder": lv, "verdicts": [v.to_dict() for v in verdicts]})
    for r in rows:
        print(f"eps={r[0]:<8g} delta={r[1]:<8g} t={r[3]:<8g} distance {r[4]:.6e}")
    if lv["verdict"] is None:
        print("single rung: no convergence verdict")
    else:
        print(f"ladder: {lv['verdict']} (final below half of first: {lv['halved']})")
    _print_verdicts(verdicts)
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VIOLATION


# -- properties ---------------------------------------------------------------

def cmd_properties(cfg: ScenarioConfig, out: OutputDir, jobs: int) -> int:
    pr = cfg["properties"]
    pair = cfg.pair()
    specs = [props.TrialSpec(cfg["seed"], i, pr["nu"], float(pr["T"]), pr["n_jumps"],
                             float(pr["amplitude"]), pr["n_samples"], pr["mutate"])
             for i in range(pr["trials"])]
    if not specs:
        log.warning("zero trials requested: vacuous pass")
    summary = props.run_trials(specs, pair, jobs=jobs)
    cols = ("trial",) + props.PROPERTIES
    out.csv("trials.csv", cols,
            ((t.index,) + tuple(t.margins.get(k) for k in props.PROPERTIES)
             for t in summary.trials))
    table = list(summary.table())
    out.json("properties.json", {
        "command": "properties", "config": cfg.data, "trials": len(specs),
        "passed": summary.passed,
        "summary": [{"property": n, "trials": k, "failures": f, "worst_margin": w}
                    for n, k, f, w in table],
        "failures": summary.failures()})
    print(f"{'property':<16}{'trials':>7}{'fail':>6}  worst margin")
    for n, k, f, w in table:
        print(f"{n:<16}{k:>7}{f:>6}  {w:.3e}")
    if not specs:
        print("no trials run")
    return EXIT_OK if summary.passed else EXIT_VIOLATION


# -- converge -----------------------------------------------------------------

def cmd_converge(cfg: ScenarioConfig, out: OutputDir, jobs: int) -> int:
    pair = cfg.pair()
    T = float(cfg["T"])
    p = cfg.initial()
    nus = cfg.nus()
    lad = sg.nu_ladder(p, pair, T, nus, jobs=jobs)
    out.csv("nu_ladder.csv", LADDER_COLUMNS, (r.as_tuple() for r in lad.rows))
    doc = {"command": "converge", "config": cfg.data, "T": T, "reference_nu": lad.reference_nu,
           "nu_ladder": [dict(zip(LADDER_COLUMNS, r.as_tuple())) for r in lad.rows],
           "nu_verdict": ladder_verdict(lad.distances()[:-1])}
    print(f"{'nu':>4} {'distance':>13} {'ratio':>8} {'order':>7} {'apriori':>11}")
    for r in lad.rows:
        ratio = "" if r.ratio is None else f"{r.ratio:.3f}"
        order = "" if r.order is None else f"{r.order:.3f}"
        print(f"{r.nu:>4} {r.distance:13.6e} {ratio:>8} {order:>7} {r.apriori:11.4e}")
    code = EXIT_OK
    if cfg["viscous"]["ladder"]:
        ref = sg.run(lad.reference_nu, p, pair, T)
        rows, finals, _, verdicts = _viscous_ladder(cfg, p, pair, T, [T], lambda t: ref.final,
                                                    jobs)
        out.csv("viscous_distances.csv", VISCOUS_COLUMNS, rows)
        doc["viscous"] = {"distances": finals, "ladder": ladder_verdict(finals),
                          "verdicts": [v.to_dict() for v in verdicts]}
        _print_verdicts(verdicts)
        if not all(v.passed for v in verdicts):
            code = EXIT_VIOLATION
    out.json("converge.json", doc)
    return code


# -- entry point ----------------------------------------------------------------

COMMANDS = {"run": cmd_run, "compare": cmd_compare, "properties": cmd_properties,
            "converge": cmd_converge}


DESCRIPTIONS = {
    "run": "track one scenario and write profiles, events and diagnostics",
    "compare": "front tracking against the viscous (eps, delta) ladder",
    "properties": "randomized invariant trials with a worst-margin table",
    "converge": "nu-ladder and viscous-ladder distance tables",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON scenario file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: config 'output' or ./twoflux-out)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for trials and random initial data")
    common.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a config key (dotted path, JSON value); repeatable")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    parser = argparse.ArgumentParser(prog="twoflux", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in DESCRIPTIONS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _resolve(args) -> ScenarioConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = load_config(args.config, overrides)
    if args.seed is not None and cfg["initial"]["kind"] == "random_piecewise":
        cfg = load_config(args.config, overrides + [f"initial.seed={args.seed}"])
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _resolve(args)
        out = OutputDir(args.out or cfg.data.get("output") or "twoflux-out", cfg.hash())
        return COMMANDS[args.command](cfg, out, args.jobs)
    except (ConfigError, FluxError, ProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (tracker.TrackerError, ViscousBlowUp, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
