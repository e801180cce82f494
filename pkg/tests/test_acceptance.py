"""Acceptance criteria, each checked at its stated tolerance.

Every criterion prints one ``[acceptance N] PASS|FAIL`` line. Run with
``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_params  # noqa: E402
from ptswitch import cli  # noqa: E402
from ptswitch.analysis import AnalysisConfig, Direction, Phase, estimate_generation_frequency, symmetry_ratio  # noqa: E402
from ptswitch.config import load_config  # noqa: E402
from ptswitch.dynamics import IntegratorConfig, ModeState, initial_state, integrate  # noqa: E402
from ptswitch.experiments import (  # noqa: E402
    EnsembleSpec,
    SweepSpec,
    branch_jumps,
    histogram_modes,
    run_ensemble,
    sweep_drive,
)
from ptswitch.model import (  # noqa: E402
    EP_RTOL,
    PT_TOL,
    Branch,
    Symmetry,
    linearization_matrix,
    linearize_zero_solution,
    nonzero_solution,
    thresholds,
)
from ptswitch.output import csv_payload, json_payload  # noqa: E402

FIG1 = load_config("fig1.cfg")


def fig1_ensemble_spec(**param_overrides):
    return EnsembleSpec(
        params=replace(FIG1.params, **param_overrides),
        n_trajectories=FIG1.ensemble.trajectories,
        master_seed=FIG1.integrator.seed,
        integrator=FIG1.integrator,
        analysis=FIG1.analysis,
    )


_ensemble_cache = {}


def fig1_ensemble(**param_overrides):
    key = tuple(sorted(param_overrides.items()))
    if key not in _ensemble_cache:
        _ensemble_cache[key] = run_ensemble(fig1_ensemble_spec(**param_overrides))
    return _ensemble_cache[key]


def within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


def criterion_1():
    t0 = time.perf_counter()
    p = FIG1.params
    th = thresholds(p)
    ok_ex = within(th.omega_ex, 1.1e-2, 1e-5)
    ok_ep = within(th.omega_ep, 4.5891e-2, 1e-5)
    ok_th = within(th.omega_th, 4.5937e-2, 1e-5)
    grid = np.linspace(0.0, 0.1, 2001)
    growth = np.array([np.linalg.eigvals(linearization_matrix(replace(p, omega_drive=om))).real.max() for om in grid])
    k = int(np.flatnonzero(growth > 0)[0])
    ok_scan = growth[k - 1] <= 0 and grid[k - 1] <= th.omega_th <= grid[k]
    elapsed = time.perf_counter() - t0
    ok = ok_ex and ok_ep and ok_th and ok_scan and elapsed < 1.0
    detail = (f"omega_ex={th.omega_ex:.6e} ({ok_ex}) omega_ep={th.omega_ep:.6e} ({ok_ep}) "
              f"omega_th={th.omega_th:.7e} vs 4.5937e-2 rel dev {abs(th.omega_th / 4.5937e-2 - 1):.2e} ({ok_th}) "
              f"scan sign change in [{grid[k - 1]:.5f}, {grid[k]:.5f}] ({ok_scan}) {elapsed:.2f}s")
    return ok, detail


def criterion_2():
    t0 = time.perf_counter()
    p = FIG1.params
    ep = thresholds(p).omega_ep
    la = linearize_zero_solution(replace(p, omega_drive=ep))
    gap = abs(la.lambda_plus - la.lambda_minus) / abs(la.lambda_plus)
    rng = np.random.default_rng(20240)
    above_bad = below_bad = 0
    worst_above, least_below = 0.0, math.inf
    draws = 0
    while draws < 1000:
        base = random_params(rng)
        ep_i = thresholds(base).omega_ep
        if ep_i == 0:
            continue
        offset = 10 ** rng.uniform(math.log10(20 * EP_RTOL), 0.0)
        up = linearize_zero_solution(replace(base, omega_drive=ep_i * (1 + offset)))
        g_up = max(abs(abs(e[0]) - abs(e[1])) / max(abs(e[0]), abs(e[1])) for e in (up.e_plus, up.e_minus))
        worst_above = max(worst_above, g_up)
        above_bad += not (g_up <= 1e-10 and up.symmetry is Symmetry.PT_SYMMETRIC)
        down = linearize_zero_solution(replace(base, omega_drive=ep_i * (1 - offset / 2)))
        least_below = min(least_below, down.magnitude_gap)
        below_bad += not (down.magnitude_gap > PT_TOL and down.symmetry is Symmetry.NON_PT_SYMMETRIC)
        draws += 1
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-8 and above_bad == 0 and below_bad == 0 and elapsed < 5.0
    detail = (f"EP gap {gap:.1e}; 1000 draws: worst gap above EP {worst_above:.1e} ({above_bad} bad), "
              f"smallest gap below EP {least_below:.1e} > {PT_TOL:g} ({below_bad} bad); {elapsed:.2f}s")
    return ok, detail


def criterion_3():
    t0 = time.perf_counter()
    p = replace(FIG1.params, omega_drive=5e-2)
    cfg = IntegratorConfig(t_end=5e6, sample_stride=50, seed=1, noise_on=False)
    traj = integrate(p, initial_state(p, cfg), cfg)
    plus = nonzero_solution(p, Branch.PLUS)
    late = traj.t >= 4e6
    i2, ib = np.mean(traj.i2[late]), np.mean(traj.ib[late])
    r = symmetry_ratio(traj, AnalysisConfig().resolve_window(p))[late]
    freq = estimate_generation_frequency(traj, (4e6, 5e6))
    elapsed = time.perf_counter() - t0
    ok_i = within(i2, plus.a2_intensity, 0.01) and within(ib, plus.b_intensity, 0.01)
    ok_r = np.max(np.abs(r - 1)) <= 1e-3
    ok_f = within(freq, -5e-4, 0.01)
    ok = ok_i and ok_r and ok_f and elapsed < 30
    detail = (f"|a2|^2={i2:.4f} |b|^2={ib:.4f} vs {plus.a2_intensity:.4f}; max|r-1|={np.max(np.abs(r - 1)):.1e}; "
              f"generation freq {freq:.6e}; {elapsed:.2f}s")
    return ok, detail


def criterion_4():
    t0 = time.perf_counter()
    p = replace(FIG1.params, g=0.0, nbar=100.0)
    # 2e8 time units keep the standard error of the mean near 0.5 %
    cfg = IntegratorConfig(t_end=2e8, sample_stride=50, seed=FIG1.integrator.seed)
    traj = integrate(p, ModeState(0, 0, 0), cfg)
    mean_b = float(np.mean(traj.ib[traj.t >= 50 / p.gammab]))
    elapsed = time.perf_counter() - t0
    ok = abs(mean_b - 100.0) <= 5.0 and elapsed < 60
    return ok, f"<|b|^2> = {mean_b:.3f} (target 100 +- 5); {elapsed:.2f}s"


def criterion_5():
    t0 = time.perf_counter()
    th = thresholds(FIG1.params)
    window_ok = th.omega_ex < FIG1.params.omega_drive < th.omega_ep
    res = fig1_ensemble()
    up, down = res.counts[Direction.TO_SYMMETRIC], res.counts[Direction.TO_NON_SYMMETRIC]
    modes = histogram_modes(res.ratio_hist, lo=FIG1.analysis.lo, hi=FIG1.analysis.hi)
    bimodal = modes is not None and modes[0] <= FIG1.analysis.lo and modes[1] >= FIG1.analysis.hi and modes[2] < 0.5
    r_non = res.mean_ratio[Phase.NON_SYMMETRIC]
    r_sym = res.mean_ratio[Phase.SYMMETRIC]
    elapsed = time.perf_counter() - t0
    ok_parts = {
        "window": window_ok and FIG1.integrator.t_end >= 5e6 and res.spec.n_trajectories == 32,
        "both directions": up >= 1 and down >= 1,
        "bimodal": bimodal,
        "NonSymmetric mean r <= 0.1": r_non <= 0.1,
        "|Symmetric mean r - 1| <= 0.1": abs(r_sym - 1) <= 0.1,
    }
    failed = [k for k, v in ok_parts.items() if not v]
    mode_text = "none" if modes is None else f"r={modes[0]:.3f}/{modes[1]:.3f} trough {modes[2]:.3f}"
    detail = (f"transitions N->S {up}, S->N {down}; modes {mode_text}; mean r NonSym {r_non:.4f}, "
              f"Sym {r_sym:.4f}; failed: {', '.join(failed) or 'none'}; {elapsed:.1f}s")
    return not failed, detail


def criterion_6():
    t0 = time.perf_counter()
    low = fig1_ensemble(nbar=50.0)
    high = fig1_ensemble(nbar=200.0)
    m50, m200 = low.median_transitions, high.median_transitions
    elapsed = time.perf_counter() - t0
    detail = (f"median transitions n=50: {m50:g} (total {sum(low.transition_counts)}), "
              f"n=200: {m200:g} (total {sum(high.transition_counts)}); {elapsed:.1f}s")
    return m200 >= m50, detail


def criterion_7():
    t0 = time.perf_counter()
    p = replace(FIG1.params, nbar=0.0)
    th = thresholds(p)
    grid = np.linspace(0.5 * th.omega_ex, 1.2 * th.omega_th, 61)
    step = grid[1] - grid[0]
    spec = SweepSpec(omegas=tuple(grid), integrator=replace(FIG1.integrator, noise_on=False, sample_stride=50))
    res = sweep_drive(spec, p)
    up, down = branch_jumps(res)
    ok_up = up is not None and th.omega_th <= up < th.omega_th + step
    ok_down = down is not None and abs(down - th.omega_ex) <= step
    above = [pt for pt in res.points if pt.omega > th.omega_th]
    worst = max(abs(pt.mean_i2 / pt.analytic_i2_plus - 1) for pt in above)
    ok = ok_up and ok_down and worst <= 0.02
    detail = (f"grid step {step:.2e}; up jump at {up:.5e} (omega_th {th.omega_th:.5e}); "
              f"down jump at {down:.5e} (omega_ex {th.omega_ex:.5e}); worst |a2|^2 dev above omega_th "
              f"{worst:.1e}; {time.perf_counter() - t0:.1f}s")
    return ok, detail


def criterion_8(tmp_dir):
    t0 = time.perf_counter()
    tmp_dir = Path(tmp_dir)
    commands = [
        ("simulate", "csv"), ("simulate", "json"), ("ensemble", "csv"), ("ensemble", "json"),
        ("sweep", "csv"), ("sweep", "json"),
    ]
    mismatched = []
    for cmd, fmt in commands:
        texts = []
        for k in range(2):
            out = tmp_dir / f"{cmd}_{k}.{fmt}"
            code = cli.main([cmd, "fig1.cfg", "--seed", "4242", "--format", fmt, "--out", str(out)])
            if code != 0:
                mismatched.append(f"{cmd}/{fmt} exit {code}")
            texts.append(out.read_text())
        payload = csv_payload if fmt == "csv" else json_payload
        if payload(texts[0]).encode() != payload(texts[1]).encode():
            mismatched.append(f"{cmd}/{fmt}")
    detail = f"{len(commands)} command/format pairs run twice; mismatches: {mismatched or 'none'}; {time.perf_counter() - t0:.1f}s"
    return not mismatched, detail


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
}


REPORT_LINES = []


def report(n, ok, detail):
    line = f"[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}"
    REPORT_LINES.append(line)
    print(line, flush=True)
    return line


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_acceptance(n, tmp_path):
    fn = CRITERIA[n]
    ok, detail = fn(tmp_path) if n == 8 else fn()
    report(n, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    results = []
    for n, fn in sorted(CRITERIA.items()):
        with tempfile.TemporaryDirectory() as d:
            ok, detail = fn(d) if n == 8 else fn()
        report(n, ok, detail)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
