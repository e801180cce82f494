"""Post-processing of trajectories: smoothing, symmetry ratio, phase segmentation."""

from __future__ import annotations

import enum
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import (
    DegeneratePhononIntensity,
    InvalidThresholds,
    WindowNotCoherent,
    WindowTooShort,
)
from .model import SystemParams, generation_frequency

INTENSITY_FLOOR = 1e-300
MIN_WINDOW_SAMPLES = 10


class Phase(str, enum.Enum):
    SYMMETRIC = "Symmetric"
    NON_SYMMETRIC = "NonSymmetric"
    UNDECIDED = "Undecided"


class Direction(str, enum.Enum):
    TO_NON_SYMMETRIC = "SymmetricToNonSymmetric"
    TO_SYMMETRIC = "NonSymmetricToSymmetric"


@dataclass(frozen=True)
class AnalysisConfig:
    """Segmentation settings; ``None`` windows default to 20/gamma."""

    window: Optional[float] = None
    hi: float = 0.5
    lo: float = 0.1
    min_dwell: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.lo < self.hi < 1:
            raise InvalidThresholds(f"need 0 < lo < hi < 1, got lo={self.lo!r}, hi={self.hi!r}")
        if self.window is not None and not self.window > 0:
            raise WindowTooShort(f"window must be positive, got {self.window!r}")
        if self.min_dwell is not None and self.min_dwell < 0:
            raise ValueError("min_dwell must be >= 0")

    def resolve_window(self, p: SystemParams) -> float:
        if self.window is not None:
            return self.window
        return 20.0 / (0.5 * (p.gamma2 + p.gammab))

    def resolve_min_dwell(self, p: SystemParams) -> float:
        return self.resolve_window(p) if self.min_dwell is None else self.min_dwell


@dataclass(frozen=True)
class SmoothedIntensities:
    t: np.ndarray
    i1: np.ndarray
    i2: np.ndarray
    ib: np.ndarray


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    label: Phase
    # sample indices [start_index, stop_index)
    start_index: int
    stop_index: int

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class TransitionEvent:
    time: float
    direction: Direction


@dataclass(frozen=True)
class PhaseSegmentation:
    segments: tuple[Segment, ...]
    transitions: tuple[TransitionEvent, ...]

    @property
    def t_start(self) -> float:
        return self.segments[0].start

    @property
    def t_end(self) -> float:
        return self.segments[-1].end

    def sample_labels(self) -> np.ndarray:
        """Per-sample label codes: 1 symmetric, -1 non-symmetric, 0 undecided."""
        out = np.zeros(self.segments[-1].stop_index, dtype=np.int8)
        for s in self.segments:
            out[s.start_index:s.stop_index] = _CODE[s.label]
        return out


@dataclass(frozen=True)
class TransitionStats:
    counts: dict
    dwell_times: dict
    mean_dwell: dict
    median_dwell: dict
    occupancy: dict = field(default_factory=dict)

    @property
    def total_transitions(self) -> int:
        return sum(self.counts.values())


_CODE = {Phase.SYMMETRIC: 1, Phase.NON_SYMMETRIC: -1, Phase.UNDECIDED: 0}
_LABEL = {v: k for k, v in _CODE.items()}


@numba.njit(cache=True, nogil=True)
def _boxcar(x, half):
    n = len(x)
    out = np.empty(n)
    lo, hi = 0, 0
    s = 0.0
    ref = 0.0
    since = 0
    for i in range(n):
        new_lo = max(i - half, 0)
        new_hi = min(i + half + 1, n)
        while hi < new_hi:
            s += x[hi]
            hi += 1
        while lo < new_lo:
            s -= x[lo]
            lo += 1
        since += 1
        # a running sum loses the small tail of a decaying series to
        # cancellation; re-add the window from scratch when it shrinks a lot
        if abs(s) < 1e-3 * ref or since > 2 * half + 1:
            s = 0.0
            for k in range(lo, hi):
                s += x[k]
            ref = abs(s)
            since = 0
        ref = max(ref, abs(s))
        out[i] = s / (hi - lo)
    return out


def moving_average(x: np.ndarray, half: int) -> np.ndarray:
    """Centered boxcar of 2*half+1 samples; windows shrink at the edges."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return x.copy()
    if x.min() == x.max():
        return x.copy()
    return _boxcar(x, int(half))


def window_half_width(traj, window: float) -> int:
    dt = traj.t[1] - traj.t[0] if len(traj.t) > 1 else math.inf
    if not window >= MIN_WINDOW_SAMPLES * dt:
        raise WindowTooShort(
            f"window {window:.6g} is shorter than {MIN_WINDOW_SAMPLES} sampling intervals ({dt:.6g})"
        )
    return int(round(window / (2.0 * dt)))


def smooth_intensities(traj, window: float) -> SmoothedIntensities:
    half = window_half_width(traj, window)
    return SmoothedIntensities(
        t=traj.t,
        i1=moving_average(traj.i1, half),
        i2=moving_average(traj.i2, half),
        ib=moving_average(traj.ib, half),
    )


def symmetry_ratio(traj, window: float) -> np.ndarray:
    """Smoothed |a2|^2 / smoothed |b|^2, sample by sample."""
    half = window_half_width(traj, window)
    ib = moving_average(traj.ib, half)
    if np.min(ib) < INTENSITY_FLOOR:
        k = int(np.argmin(ib))
        raise DegeneratePhononIntensity(
            f"smoothed |b|^2 = {ib[k]:.3g} below floor at t = {traj.t[k]:.6g}"
        )
    return moving_average(traj.i2, half) / ib


def _runs(codes: np.ndarray) -> list[list[int]]:
    """Run-length encoding as [code, start, stop] triples."""
    edges = np.flatnonzero(np.diff(codes)) + 1
    starts = np.concatenate(([0], edges))
    stops = np.concatenate((edges, [len(codes)]))
    return [[int(codes[a]), int(a), int(b)] for a, b in zip(starts, stops)]


def _run_duration(run, t, t_end) -> float:
    end = t[run[2]] if run[2] < len(t) else t_end
    return end - t[run[1]]


def _coalesce(runs):
    merged = [runs[0]]
    for code, a, b in runs[1:]:
        if code == merged[-1][0]:
            merged[-1][2] = b
        else:
            merged.append([code, a, b])
    return merged


def segment_ratio(t, r, hi: float = 0.5, lo: float = 0.1, min_dwell: float = 0.0) -> PhaseSegmentation:
    """Hysteresis segmentation of a ratio series sampled at times ``t``.

    Samples enter Symmetric at r >= hi and NonSymmetric at r <= lo and keep
    their label in between; samples before the first decisive crossing are
    Undecided. Decided runs shorter than ``min_dwell`` are absorbed into their
    neighbours, shortest first.
    """
    if not 0 < lo < hi < 1:
        raise InvalidThresholds(f"need 0 < lo < hi < 1, got lo={lo!r}, hi={hi!r}")
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if len(t) == 0 or len(t) != len(r):
        raise ValueError("t and r must be nonempty and of equal length")

    decisive = np.where(r >= hi, 1, np.where(r <= lo, -1, 0)).astype(np.int8)
    last = np.where(decisive != 0, np.arange(len(r)), -1)
    np.maximum.accumulate(last, out=last)
    codes = np.where(last >= 0, decisive[np.maximum(last, 0)], 0)

    t_end = t[-1]
    runs = _runs(codes)
    while True:
        decided = [k for k, run in enumerate(runs) if run[0] != 0]
        if len(decided) < 2:
            break
        durations = [_run_duration(runs[k], t, t_end) for k in decided]
        j = int(np.argmin(durations))
        if durations[j] >= min_dwell:
            break
        k = decided[j]
        prev = runs[k - 1][0] if k > 0 else 0
        runs[k][0] = prev if prev != 0 else runs[k + 1][0]
        runs = _coalesce(runs)

    segments = []
    transitions = []
    for code, a, b in runs:
        end = t[b] if b < len(t) else t_end
        label = _LABEL[code]
        if segments and segments[-1].label is not Phase.UNDECIDED:
            direction = Direction.TO_SYMMETRIC if code == 1 else Direction.TO_NON_SYMMETRIC
            transitions.append(TransitionEvent(float(t[a]), direction))
        segments.append(Segment(float(t[a]), float(end), label, a, b))
    return PhaseSegmentation(tuple(segments), tuple(transitions))


def segment_phases(traj, window: float, hi: float = 0.5, lo: float = 0.1,
                   min_dwell: Optional[float] = None) -> PhaseSegmentation:
    """Label Symmetric / NonSymmetric episodes of a trajectory.

    ``min_dwell`` defaults to ``window``.
    """
    if not 0 < lo < hi < 1:
        raise InvalidThresholds(f"need 0 < lo < hi < 1, got lo={lo!r}, hi={hi!r}")
    r = symmetry_ratio(traj, window)
    return segment_ratio(traj.t, r, hi, lo, window if min_dwell is None else min_dwell)


def transition_stats(seg: PhaseSegmentation) -> TransitionStats:
    if not seg.segments:
        raise ValueError("empty segmentation")
    counts = {d: 0 for d in Direction}
    for ev in seg.transitions:
        counts[ev.direction] += 1
    dwell = {p: [] for p in Phase}
    for s in seg.segments:
        dwell[s.label].append(s.duration)
    total = seg.t_end - seg.t_start
    if total > 0:
        occupancy = {p: math.fsum(dwell[p]) / total for p in Phase}
    else:
        occupancy = {p: float(p is seg.segments[0].label) for p in Phase}
    return TransitionStats(
        counts=counts,
        dwell_times=dwell,
        mean_dwell={p: (statistics.fmean(v) if v else math.nan) for p, v in dwell.items()},
        median_dwell={p: (statistics.median(v) if v else math.nan) for p, v in dwell.items()},
        occupancy=occupancy,
    )


def segment_mean_ratio(seg: PhaseSegmentation, r: np.ndarray) -> dict:
    """Sample mean of r over all segments carrying each label (nan if absent)."""
    codes = seg.sample_labels()
    out = {}
    for p in Phase:
        mask = codes == _CODE[p]
        out[p] = float(np.mean(r[mask])) if mask.any() else math.nan
    return out


def estimate_generation_frequency(traj, window: Sequence[float]) -> float:
    """Phonon generation frequency from the unwrapped phase of b.

    b is taken to rotate as exp(-i dw t) in the rotating frame, so the
    returned value is minus the least-squares slope of arg b. When the
    trajectory carries its parameters, the sample spacing must be below
    pi/|dw| for the predicted dw; aliased or incoherent windows raise
    :class:`WindowNotCoherent`.
    """
    t0, t1 = window
    t = np.asarray(traj.t)
    mask = (t >= t0) & (t <= t1)
    if mask.sum() < 3:
        raise WindowNotCoherent(f"fewer than 3 samples in [{t0}, {t1}]")
    tw = t[mask]
    bw = np.asarray(traj.b)[mask]
    if np.any(np.abs(bw) == 0):
        raise WindowNotCoherent("b vanishes inside the window")
    spacing = float(np.max(np.diff(tw)))
    params = getattr(traj, "params", None)
    if params is not None and abs(generation_frequency(params)) * spacing >= math.pi:
        raise WindowNotCoherent(
            f"sample spacing {spacing:.6g} too coarse for |dw| = {abs(generation_frequency(params)):.3g}"
        )
    phase = np.unwrap(np.angle(bw))
    slope, intercept = np.polyfit(tw - tw[0], phase, 1)
    resid = phase - (slope * (tw - tw[0]) + intercept)
    rms = math.sqrt(float(np.mean(resid**2)))
    if rms > math.pi / 2:
        raise WindowNotCoherent(f"phase residual RMS {rms:.3g} exceeds pi/2")
    return float(-slope)
