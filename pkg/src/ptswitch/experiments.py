"""Ensembles, drive sweeps and analytic regime maps."""

from __future__ import annotations

import enum
import logging
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .analysis import (
    AnalysisConfig,
    Direction,
    Phase,
    segment_ratio,
    symmetry_ratio,
    transition_stats,
)
from .dynamics import (
    KICK_STREAM,
    IntegratorConfig,
    ModeState,
    initial_state,
    integrate,
    mix_seed,
    noise_generator,
)
from .errors import (
    AsymmetricRates,
    DegeneratePhononIntensity,
    EnsembleFailure,
    NumericalBlowup,
    PTSwitchError,
    ValidationError,
)
from .model import (
    Branch,
    Regime,
    SystemParams,
    classify_regime,
    nonzero_intensity,
    thresholds,
)

log = logging.getLogger(__name__)

FAILURE_BUDGET = 0.10

#: log10(r) histogram bins shared by every trajectory summary
RATIO_BIN_EDGES = np.linspace(-4.0, 1.0, 101)


# ---------------------------------------------------------------- ensembles


@dataclass(frozen=True)
class EnsembleSpec:
    params: SystemParams
    n_trajectories: int
    master_seed: int
    integrator: IntegratorConfig
    analysis: AnalysisConfig = AnalysisConfig()

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValidationError("n_trajectories", "must be >= 1")

    def seed(self, index: int) -> int:
        return mix_seed(self.master_seed, index)


@dataclass(frozen=True)
class TrajectorySummary:
    index: int
    seed: int
    ok: bool
    error: str = ""
    counts: dict = field(default_factory=dict)
    occupancy: dict = field(default_factory=dict)
    dwell_times: dict = field(default_factory=dict)
    # per-phase sum of r and number of samples, for weighted merging
    ratio_sum: dict = field(default_factory=dict)
    ratio_samples: dict = field(default_factory=dict)
    ratio_hist: Optional[np.ndarray] = None
    mean_i1: float = math.nan
    mean_i2: float = math.nan
    mean_ib: float = math.nan

    @property
    def total_transitions(self) -> int:
        return sum(self.counts.values())

    def mean_ratio(self, phase: Phase) -> float:
        n = self.ratio_samples.get(phase, 0)
        return self.ratio_sum[phase] / n if n else math.nan


@dataclass(frozen=True)
class EnsembleResult:
    spec: EnsembleSpec
    summaries: tuple[TrajectorySummary, ...]
    counts: dict
    dwell_times: dict
    mean_dwell: dict
    median_dwell: dict
    occupancy: dict
    mean_ratio: dict
    ratio_hist: np.ndarray
    n_failed: int

    @property
    def transition_counts(self) -> list[int]:
        return [s.total_transitions for s in self.summaries if s.ok]

    @property
    def median_transitions(self) -> float:
        counts = self.transition_counts
        return float(statistics.median(counts)) if counts else math.nan


def summarize_trajectory(traj, analysis: AnalysisConfig, index: int = 0, seed: int = 0) -> TrajectorySummary:
    p = traj.params
    window = analysis.resolve_window(p)
    r = symmetry_ratio(traj, window)
    seg = segment_ratio(traj.t, r, analysis.hi, analysis.lo, analysis.resolve_min_dwell(p))
    st = transition_stats(seg)
    codes = seg.sample_labels()
    code_of = {Phase.SYMMETRIC: 1, Phase.NON_SYMMETRIC: -1, Phase.UNDECIDED: 0}
    ratio_sum, ratio_n = {}, {}
    for ph, c in code_of.items():
        m = codes == c
        ratio_sum[ph] = math.fsum(r[m])
        ratio_n[ph] = int(m.sum())
    with np.errstate(divide="ignore"):
        hist, _ = np.histogram(np.log10(r), bins=RATIO_BIN_EDGES)
    return TrajectorySummary(
        index=index,
        seed=seed,
        ok=True,
        counts=dict(st.counts),
        occupancy=dict(st.occupancy),
        dwell_times={k: list(v) for k, v in st.dwell_times.items()},
        ratio_sum=ratio_sum,
        ratio_samples=ratio_n,
        ratio_hist=hist,
        mean_i1=float(np.mean(traj.i1)),
        mean_i2=float(np.mean(traj.i2)),
        mean_ib=float(np.mean(traj.ib)),
    )


def _run_one(spec: EnsembleSpec, index: int) -> TrajectorySummary:
    seed = spec.seed(index)
    cfg = replace(spec.integrator, seed=seed)
    try:
        traj = integrate(spec.params, initial_state(spec.params, cfg), cfg)
        return summarize_trajectory(traj, spec.analysis, index, seed)
    except (NumericalBlowup, DegeneratePhononIntensity) as exc:
        log.warning("trajectory %d (seed %d) failed: %s", index, seed, exc)
        return TrajectorySummary(index=index, seed=seed, ok=False, error=str(exc))


def merge_summaries(spec: EnsembleSpec, summaries: Sequence[TrajectorySummary]) -> EnsembleResult:
    """Order-independent reduction of per-trajectory summaries."""
    summaries = tuple(sorted(summaries, key=lambda s: s.index))
    good = [s for s in summaries if s.ok]
    counts = {d: sum(s.counts[d] for s in good) for d in Direction}
    dwell = {ph: [x for s in good for x in s.dwell_times[ph]] for ph in Phase}
    occupancy = {
        ph: (math.fsum(s.occupancy[ph] for s in good) / len(good) if good else math.nan) for ph in Phase
    }
    mean_ratio = {}
    for ph in Phase:
        n = sum(s.ratio_samples[ph] for s in good)
        mean_ratio[ph] = math.fsum(s.ratio_sum[ph] for s in good) / n if n else math.nan
    hist = np.zeros(len(RATIO_BIN_EDGES) - 1, dtype=np.int64)
    for s in good:
        hist += s.ratio_hist
    return EnsembleResult(
        spec=spec,
        summaries=summaries,
        counts=counts,
        dwell_times=dwell,
        mean_dwell={ph: (statistics.fmean(v) if v else math.nan) for ph, v in dwell.items()},
        median_dwell={ph: (statistics.median(v) if v else math.nan) for ph, v in dwell.items()},
        occupancy=occupancy,
        mean_ratio=mean_ratio,
        ratio_hist=hist,
        n_failed=len(summaries) - len(good),
    )


def run_ensemble(spec: EnsembleSpec, workers: Optional[int] = None) -> EnsembleResult:
    """Run independent trajectories with seeds mix_seed(master, index).

    The numba kernel releases the GIL, so a thread pool runs trajectories in
    parallel. Individual blow-ups are recorded; more than 10 % of them raise
    :class:`EnsembleFailure`.
    """
    if workers is None:
        workers = min(spec.n_trajectories, os.cpu_count() or 1)
    if workers <= 1:
        summaries = [_run_one(spec, i) for i in range(spec.n_trajectories)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(lambda i: _run_one(spec, i), range(spec.n_trajectories)))
    result = merge_summaries(spec, summaries)
    if result.n_failed > FAILURE_BUDGET * spec.n_trajectories:
        failed = [f"#{s.index}: {s.error}" for s in result.summaries if not s.ok]
        raise EnsembleFailure(
            f"{result.n_failed}/{spec.n_trajectories} trajectories failed: " + "; ".join(failed[:5])
        )
    return result


def histogram_modes(hist: np.ndarray, edges: np.ndarray = RATIO_BIN_EDGES, lo: float = 0.1,
                    hi: float = 0.5) -> Optional[tuple[float, float, float]]:
    """Check that a log10(r) histogram has one mode below ``lo`` and one above ``hi``.

    Returns (low mode r, high mode r, depth) where depth is the minimum count
    between the modes over the smaller mode count, or None if either side
    is empty.
    """
    hist = np.asarray(hist, dtype=float)
    centres = 10 ** (0.5 * (edges[:-1] + edges[1:]))
    low = np.flatnonzero(centres <= lo)
    high = np.flatnonzero(centres >= hi)
    if len(low) == 0 or len(high) == 0 or hist[low].max() == 0 or hist[high].max() == 0:
        return None
    i = low[np.argmax(hist[low])]
    j = high[np.argmax(hist[high])]
    trough = hist[i:j + 1].min()
    depth = trough / min(hist[i], hist[j])
    return float(centres[i]), float(centres[j]), float(depth)


# ---------------------------------------------------------------- sweeps


class SweepDirection(str, enum.Enum):
    UP = "Up"
    DOWN = "Down"
    BOTH = "Both"


@dataclass(frozen=True)
class SweepSpec:
    """Drive-amplitude scan.

    ``settle``/``measure`` default to 50/gamma and 200/gamma. Every grid point
    receives a phonon kick of size ``kick`` so that noiseless scans can leave
    an unstable zero solution.
    """

    omegas: tuple
    direction: SweepDirection = SweepDirection.BOTH
    carry_state: bool = True
    settle: Optional[float] = None
    measure: Optional[float] = None
    integrator: IntegratorConfig = IntegratorConfig(t_end=1.0, sample_stride=50)
    analysis: AnalysisConfig = AnalysisConfig()
    kick: float = 1e-6

    def __post_init__(self):
        om = tuple(float(x) for x in self.omegas)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "direction", SweepDirection(self.direction))
        if len(om) == 0:
            raise ValidationError("omegas", "grid is empty")
        if any(b <= a for a, b in zip(om, om[1:])):
            raise ValidationError("omegas", "grid must be strictly ascending")
        if om[0] < 0:
            raise ValidationError("omegas", "drive amplitudes must be >= 0")

    def times(self, p: SystemParams) -> tuple[float, float]:
        gamma = 0.5 * (p.gamma2 + p.gammab)
        settle = 50.0 / gamma if self.settle is None else self.settle
        measure = 200.0 / gamma if self.measure is None else self.measure
        if settle < 10.0 / gamma * (1 - 1e-12):
            raise ValidationError("settle", f"must be >= 10/gamma = {10.0 / gamma:.6g}")
        return settle, measure


@dataclass(frozen=True)
class SweepPoint:
    omega: float
    direction: SweepDirection
    mean_i1: float
    mean_i2: float
    mean_ib: float
    mean_ratio: float
    occ_sym: float
    occ_nonsym: float
    analytic_i2_plus: float
    analytic_i1_zero: float


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    omega_ex: float
    omega_ep: float
    omega_th: float

    def scan(self, direction: SweepDirection) -> list[SweepPoint]:
        return [pt for pt in self.points if pt.direction is SweepDirection(direction)]


def _analytic_plus(p: SystemParams) -> float:
    try:
        value = nonzero_intensity(p, Branch.PLUS)
    except PTSwitchError:
        return math.nan
    return value if value >= 0 else math.nan


def _kicked(state: ModeState, size: float, seed: int) -> ModeState:
    if size == 0:
        return state
    eta = noise_generator(seed, KICK_STREAM).standard_normal(2)
    return ModeState(state.a1, state.a2, state.b + size * complex(eta[0], eta[1]) / math.sqrt(2), 0.0)


def _measure_point(p, start, spec, settle, measure, seed, direction) -> tuple[SweepPoint, ModeState]:
    tmpl = spec.integrator
    dt = tmpl.resolve_dt(p)
    n_settle = max(1, int(round(settle / dt)))
    s_cfg = replace(tmpl, t_end=settle, seed=mix_seed(seed, 0), sample_stride=n_settle)
    settled = integrate(p, start, s_cfg).final
    m_cfg = replace(tmpl, t_end=measure, seed=mix_seed(seed, 1))
    traj = integrate(p, ModeState(settled.a1, settled.a2, settled.b, 0.0), m_cfg)

    i1, i2, ib = float(np.mean(traj.i1)), float(np.mean(traj.i2)), float(np.mean(traj.ib))
    ratio = i2 / ib if ib > 0 else math.nan
    occ_sym = occ_non = math.nan
    try:
        window = spec.analysis.resolve_window(p)
        r = symmetry_ratio(traj, window)
        seg = segment_ratio(traj.t, r, spec.analysis.hi, spec.analysis.lo,
                            spec.analysis.resolve_min_dwell(p))
        occ = transition_stats(seg).occupancy
        occ_sym, occ_non = occ[Phase.SYMMETRIC], occ[Phase.NON_SYMMETRIC]
    except (DegeneratePhononIntensity, PTSwitchError) as exc:
        log.debug("no segmentation at omega=%g: %s", p.omega_drive, exc)

    point = SweepPoint(
        omega=p.omega_drive,
        direction=direction,
        mean_i1=i1,
        mean_i2=i2,
        mean_ib=ib,
        mean_ratio=ratio,
        occ_sym=occ_sym,
        occ_nonsym=occ_non,
        analytic_i2_plus=_analytic_plus(p),
        analytic_i1_zero=p.omega_drive**2 / (p.gamma1**2 + p.dw1**2),
    )
    return point, traj.final


def sweep_drive(spec: SweepSpec, p: SystemParams) -> SweepResult:
    """Scan the drive amplitude, optionally warm-starting each point.

    With ``Both`` the down scan starts from the up scan's final state, which
    exposes the hysteresis loop of the bistable window.
    """
    settle, measure = spec.times(p)
    master = spec.integrator.seed
    legs = {
        SweepDirection.UP: [SweepDirection.UP],
        SweepDirection.DOWN: [SweepDirection.DOWN],
        SweepDirection.BOTH: [SweepDirection.UP, SweepDirection.DOWN],
    }[spec.direction]

    points = []
    state = None
    k = 0
    for leg in legs:
        grid = spec.omegas if leg is SweepDirection.UP else spec.omegas[::-1]
        for om in grid:
            pk = replace(p, omega_drive=om)
            seed = mix_seed(master, k)
            if spec.carry_state and state is not None:
                base = state
            else:
                base = initial_state(pk, replace(spec.integrator, seed=seed), kick=0.0)
            start = _kicked(base, spec.kick, seed)
            point, state = _measure_point(pk, start, spec, settle, measure, seed, leg)
            points.append(point)
            k += 1

    try:
        th = thresholds(p)
        oex, oep, oth = th.omega_ex, th.omega_ep, th.omega_th
    except AsymmetricRates:
        oex = oep = oth = math.nan
    return SweepResult(tuple(points), oex, oep, oth)


def branch_jumps(result: SweepResult, level: float = 1.0) -> tuple[Optional[float], Optional[float]]:
    """Drive amplitudes where the scans switch branch.

    Returns (first up-scan omega with mean |a2|^2 >= level, first down-scan
    omega with mean |a2|^2 < level); None where no switch happens.
    """
    up = next((pt.omega for pt in result.scan(SweepDirection.UP) if pt.mean_i2 >= level), None)
    down = next((pt.omega for pt in result.scan(SweepDirection.DOWN) if pt.mean_i2 < level), None)
    return up, down


# ---------------------------------------------------------------- regime map


_PARAM_NAMES = tuple(f.name for f in fields(SystemParams))


@dataclass(frozen=True)
class RegimeMap:
    axis1: str
    grid1: np.ndarray
    axis2: str
    grid2: np.ndarray
    # labels[i, j] for grid1[i], grid2[j]; None marks invalid cells
    labels: np.ndarray
    omega_ex: np.ndarray
    omega_ep: np.ndarray
    omega_th: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.vectorize(lambda x: x is not None, otypes=[bool])(self.labels)


def regime_map(template: SystemParams, axis1: tuple[str, Sequence[float]],
               axis2: tuple[str, Sequence[float]]) -> RegimeMap:
    """Analytic regime label and thresholds on a 2-D parameter grid."""
    (name1, grid1), (name2, grid2) = axis1, axis2
    for name in (name1, name2):
        if name not in _PARAM_NAMES:
            raise ValidationError(name, f"not a SystemParams field; choose from {', '.join(_PARAM_NAMES)}")
    if name1 == name2:
        raise ValidationError(name2, "axes must name different parameters")
    grid1 = np.asarray(grid1, dtype=float)
    grid2 = np.asarray(grid2, dtype=float)
    shape = (len(grid1), len(grid2))
    labels = np.full(shape, None, dtype=object)
    oex, oep, oth = (np.full(shape, math.nan) for _ in range(3))
    for i, x in enumerate(grid1):
        for j, y in enumerate(grid2):
            try:
                p = replace(template, **{name1: float(x), name2: float(y)})
                th = thresholds(p)
                labels[i, j] = classify_regime(p)
            except (AsymmetricRates, ValidationError):
                continue
            oex[i, j], oep[i, j], oth[i, j] = th.omega_ex, th.omega_ep, th.omega_th
    return RegimeMap(name1, grid1, name2, grid2, labels, oex, oep, oth)


__all__ = [
    "EnsembleSpec", "EnsembleResult", "TrajectorySummary", "run_ensemble", "merge_summaries",
    "summarize_trajectory", "histogram_modes", "SweepDirection", "SweepSpec", "SweepPoint",
    "SweepResult", "sweep_drive", "branch_jumps", "RegimeMap", "regime_map", "Regime",
]
