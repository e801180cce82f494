"""Command-line interface: ``ptswitch {analyze,simulate,ensemble,sweep,map} CONFIG``.

Exit status is 0 on success, 1 for configuration or validation errors and 2
for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    INTENSITY_FLOOR,
    Direction,
    Phase,
    window_half_width,
    moving_average,
    segment_ratio,
    transition_stats,
)
from .config import RunConfig, load_config
from .dynamics import initial_state, integrate
from .errors import PTSwitchError
from .experiments import (
    EnsembleSpec,
    SweepSpec,
    histogram_modes,
    regime_map,
    run_ensemble,
    sweep_drive,
)
from .model import (
    Branch,
    classify_regime,
    derived_quantities,
    linearize_zero_solution,
    nonzero_solution,
    thresholds,
    zero_solution,
)
from .output import (
    SWEEP_COLUMNS,
    TRAJECTORY_COLUMNS,
    ResultEnvelope,
    jsonable,
    render,
)

OUTPUT_DIR_ENV = "PTSWITCH_OUTPUT_DIR"

log = logging.getLogger("ptswitch")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    params, integ = cfg.params, cfg.integrator
    if getattr(args, "omega", None) is not None:
        params = replace(params, omega_drive=args.omega)
    if getattr(args, "seed", None) is not None:
        integ = replace(integ, seed=args.seed)
    if getattr(args, "no_noise", False):
        integ = replace(integ, noise_on=False)
    integ.resolve_dt(params)
    return replace(cfg, params=params, integrator=integ)


# ---------------------------------------------------------------- analyze


def analyze_document(cfg: RunConfig) -> dict:
    """Structured closed-form report; depends on the config only."""
    p = cfg.params
    d = derived_quantities(p)
    th = thresholds(p)
    lin = linearize_zero_solution(p)
    steady = {"zero": zero_solution(p)}
    for branch in Branch:
        try:
            steady[branch.value.lower()] = nonzero_solution(p, branch)
        except PTSwitchError as exc:
            steady[branch.value.lower()] = {"exists": False, "reason": str(exc)}

    def state_doc(s):
        if isinstance(s, dict):
            return s
        return {
            "exists": True,
            "kind": s.kind,
            "a1_intensity": s.a1_intensity,
            "a2_intensity": s.a2_intensity,
            "b_intensity": s.b_intensity,
            "generation_freq": s.generation_freq,
            "stable": s.stable,
        }

    return jsonable({
        "params": {k: getattr(p, k) for k in p.__dataclass_fields__},
        "derived": {"kappa": d.kappa, "abs_kappa": abs(d.kappa), "delta": d.delta, "gamma": d.gamma_common},
        "thresholds": {
            "omega_ex": th.omega_ex,
            "omega_ep": th.omega_ep,
            "omega_th": th.omega_th,
            "bistable": th.bistable,
            "coexistence_window": th.coexistence_window,
        },
        "regime": classify_regime(p),
        "linearization": {
            "matrix": lin.matrix,
            "lambda_plus": lin.lambda_plus,
            "lambda_minus": lin.lambda_minus,
            "e_plus": lin.e_plus,
            "e_minus": lin.e_minus,
            "symmetry": lin.symmetry,
            "magnitude_gap": lin.magnitude_gap,
        },
        "steady_states": {k: state_doc(v) for k, v in steady.items()},
        "units": "frequencies and rates in units of w0",
    })


def cmd_analyze(cfg: RunConfig, args) -> str:
    doc = analyze_document(cfg)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])

        def walk(prefix, x):
            if isinstance(x, dict):
                for k, v in x.items():
                    walk(f"{prefix}.{k}" if prefix else k, v)
            else:
                writer.writerow([prefix, json.dumps(x)])

        walk("", doc)
        return buf.getvalue()
    return json.dumps(doc, indent=1) + "\n"


# ---------------------------------------------------------------- simulate


def _guarded_ratio(traj, window: float) -> np.ndarray:
    half = window_half_width(traj, window)
    i2 = moving_average(traj.i2, half)
    ib = moving_average(traj.ib, half)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ib >= INTENSITY_FLOOR, i2 / ib, np.nan)


def cmd_simulate(cfg: RunConfig, args) -> ResultEnvelope:
    p, ic = cfg.params, cfg.integrator
    traj = integrate(p, initial_state(p, ic, kick=cfg.initial_kick), ic)
    window = cfg.analysis.resolve_window(p)
    ratio = _guarded_ratio(traj, window)
    rows = np.column_stack([
        traj.t, traj.a1.real, traj.a1.imag, traj.a2.real, traj.a2.imag,
        traj.b.real, traj.b.imag, traj.i1, traj.i2, traj.ib, ratio,
    ])
    summary = {"final_ratio": float(ratio[-1])}
    if np.all(np.isfinite(ratio)):
        seg = segment_ratio(traj.t, ratio, cfg.analysis.hi, cfg.analysis.lo, cfg.analysis.resolve_min_dwell(p))
        st = transition_stats(seg)
        summary.update(transitions=st.counts, occupancy=st.occupancy)
    return ResultEnvelope("trajectory", cfg, ic.seed, TRAJECTORY_COLUMNS, rows, extra={"summary": summary})


# ---------------------------------------------------------------- ensemble


ENSEMBLE_COLUMNS = (
    "index", "seed", "ok", "n_sym_to_nonsym", "n_nonsym_to_sym", "occ_sym", "occ_nonsym",
    "occ_undecided", "mean_r_sym", "mean_r_nonsym", "mean_i1", "mean_i2", "mean_ib",
)


def cmd_ensemble(cfg: RunConfig, args) -> ResultEnvelope:
    spec = EnsembleSpec(
        params=cfg.params,
        n_trajectories=args.trajectories or cfg.ensemble.trajectories,
        master_seed=cfg.integrator.seed,
        integrator=cfg.integrator,
        analysis=cfg.analysis,
    )
    res = run_ensemble(spec, workers=args.workers or cfg.ensemble.workers)
    rows = []
    for s in res.summaries:
        if s.ok:
            rows.append([
                s.index, s.seed, True,
                s.counts[Direction.TO_NON_SYMMETRIC], s.counts[Direction.TO_SYMMETRIC],
                s.occupancy[Phase.SYMMETRIC], s.occupancy[Phase.NON_SYMMETRIC], s.occupancy[Phase.UNDECIDED],
                s.mean_ratio(Phase.SYMMETRIC), s.mean_ratio(Phase.NON_SYMMETRIC),
                s.mean_i1, s.mean_i2, s.mean_ib,
            ])
        else:
            rows.append([s.index, s.seed, False] + [math.nan] * (len(ENSEMBLE_COLUMNS) - 3))
    modes = histogram_modes(res.ratio_hist, lo=cfg.analysis.lo, hi=cfg.analysis.hi)
    aggregate = {
        "transitions": res.counts,
        "median_transitions": res.median_transitions,
        "occupancy": res.occupancy,
        "mean_dwell": res.mean_dwell,
        "median_dwell": res.median_dwell,
        "mean_ratio": res.mean_ratio,
        "n_failed": res.n_failed,
        "ratio_modes": None if modes is None else dict(zip(("low", "high", "trough_depth"), modes)),
        "ratio_histogram_log10_counts": res.ratio_hist,
    }
    return ResultEnvelope("ensemble", cfg, spec.master_seed, ENSEMBLE_COLUMNS, rows,
                          extra={"aggregate": aggregate})


# ---------------------------------------------------------------- sweep


def sweep_grid(cfg: RunConfig) -> np.ndarray:
    s = cfg.sweep
    lo, hi = s.omega_min, s.omega_max
    if lo is None or hi is None:
        th = thresholds(cfg.params)
        lo = 0.5 * th.omega_ex if lo is None else lo
        hi = 1.2 * th.omega_th if hi is None else hi
    return np.linspace(lo, hi, s.points)


def cmd_sweep(cfg: RunConfig, args) -> ResultEnvelope:
    s = cfg.sweep
    spec = SweepSpec(
        omegas=tuple(sweep_grid(cfg)),
        direction=s.direction,
        carry_state=s.carry_state,
        settle=s.settle,
        measure=s.measure,
        integrator=cfg.integrator,
        analysis=cfg.analysis,
        kick=s.kick,
    )
    res = sweep_drive(spec, cfg.params)
    rows, current = [], None
    for pt in res.points:
        if pt.direction is not current:
            current = pt.direction
            rows.append(f"# scan: {current.value}")
        rows.append([
            pt.omega, pt.mean_i1, pt.mean_i2, pt.mean_ib, pt.mean_ratio, pt.occ_sym, pt.occ_nonsym,
            pt.analytic_i2_plus, res.omega_ex, res.omega_ep, res.omega_th,
        ])
    directions = [pt.direction for pt in res.points]
    return ResultEnvelope("sweep", cfg, cfg.integrator.seed, SWEEP_COLUMNS, rows,
                          extra={"direction": directions})


# ---------------------------------------------------------------- map


def cmd_map(cfg: RunConfig, args) -> ResultEnvelope:
    m = cfg.map
    g1 = np.linspace(m.axis1_min, m.axis1_max, m.axis1_points)
    g2 = np.linspace(m.axis2_min, m.axis2_max, m.axis2_points)
    rm = regime_map(cfg.params, (m.axis1, g1), (m.axis2, g2))
    rows = []
    for i, x in enumerate(g1):
        for j, y in enumerate(g2):
            label = rm.labels[i, j]
            rows.append([x, y, "invalid" if label is None else label.value,
                         rm.omega_ex[i, j], rm.omega_ep[i, j], rm.omega_th[i, j]])
    columns = (m.axis1, m.axis2, "regime", "omega_ex", "omega_ep", "omega_th")
    return ResultEnvelope("map", cfg, cfg.integrator.seed, columns, rows)


# ---------------------------------------------------------------- plumbing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptswitch", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(name, help_text, stochastic=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="config file (bare shipped names such as fig1.cfg also work)")
        sp.add_argument("--out", help=f"output file (default: ${OUTPUT_DIR_ENV}/<command>.<format> or stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="json" if name == "analyze" else "csv")
        sp.add_argument("--omega", type=float, help="override params.omega_drive")
        if stochastic:
            sp.add_argument("--seed", type=int, help="override integrator.seed (the master seed)")
            sp.add_argument("--no-noise", action="store_true", help="integrate the deterministic flow")
        return sp

    common("analyze", "closed-form thresholds, regime, eigenpairs and steady states", stochastic=False)
    common("simulate", "integrate one trajectory")
    ens = common("ensemble", "run a seeded ensemble and segment phases")
    ens.add_argument("--trajectories", type=int)
    ens.add_argument("--workers", type=int)
    common("sweep", "drive-amplitude sweep with warm starts")
    common("map", "analytic regime map over two parameters", stochastic=False)
    return ap


COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "sweep": cmd_sweep,
    "map": cmd_map,
}


def _emit(text: str, args) -> None:
    out = args.out
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV]) / f"{args.command}.{args.format}"
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    log.info("wrote %s", out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "analyze":
            text = cmd_analyze(cfg, args)
        else:
            text = render(COMMANDS[args.command](cfg, args), args.format)
        _emit(text, args)
    except ArithmeticError as exc:
        print(f"ptswitch: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (PTSwitchError, ValueError, OSError) as exc:
        print(f"ptswitch: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
