"""Deterministic and stochastic integration of the rotating-frame mode equations.

    dA1/dt = (-gamma1 - i dw1) A1 - i g A2 b - i Omega
    dA2/dt = (-gamma2 - i dw2) A2 - i g A1 b*
    db/dt  = (-gammab - i wb) b  - i g A1 A2* + xi(t)

with <xi(t) xi*(t')> = 2 gammab nbar delta(t - t') and <xi xi> = 0, so that the
uncoupled phonon mode relaxes to <|b|^2> = nbar.

Random numbers come from numpy's Philox4x64-10 counter-based generator keyed
by (seed, stream); see :func:`noise_generator`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from .errors import NumericalBlowup, ValidationError
from .model import SystemParams, zero_solution

#: Identifier recorded in every output envelope.
RNG_ALGORITHM = "numpy.Philox4x64-10(key=seed+2**64*stream)/standard_normal"

OVERFLOW_GUARD = 1e12
MAX_PHASE_PER_STEP = 0.05
DEFAULT_PHASE_PER_STEP = 0.01

NOISE_STREAM = 0
KICK_STREAM = 1

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class Scheme(str, enum.Enum):
    EULER_MARUYAMA = "EulerMaruyama"
    STOCHASTIC_HEUN = "StochasticHeun"


@dataclass(frozen=True)
class ModeState:
    a1: complex
    a2: complex
    b: complex
    t: float = 0.0

    def __post_init__(self):
        for name in ("a1", "a2", "b"):
            z = complex(getattr(self, name))
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ValidationError(name, "amplitude must be finite")
            object.__setattr__(self, name, z)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings. ``dt = None`` selects :func:`default_dt`."""

    t_end: float
    dt: Optional[float] = None
    scheme: Scheme = Scheme.STOCHASTIC_HEUN
    seed: int = 0
    sample_stride: int = 1
    noise_on: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValidationError("t_end", "must be a positive finite time")
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError("dt", "must be > 0")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= _MASK64:
            raise ValidationError("seed", "must be an unsigned 64-bit integer")
        if isinstance(self.sample_stride, bool) or not isinstance(self.sample_stride, int) or self.sample_stride < 1:
            raise ValidationError("sample_stride", "must be a positive integer")

    def resolve_dt(self, p: SystemParams) -> float:
        dt = default_dt(p) if self.dt is None else self.dt
        if dt * p.max_rate() > MAX_PHASE_PER_STEP * (1 + 1e-12):
            raise ValidationError(
                "dt",
                f"dt = {dt:.6g} exceeds the cap {MAX_PHASE_PER_STEP}/max rate "
                f"= {MAX_PHASE_PER_STEP / p.max_rate():.6g}",
            )
        return dt

    def n_steps(self, p: SystemParams) -> int:
        return max(1, int(round(self.t_end / self.resolve_dt(p))))


def default_dt(p: SystemParams) -> float:
    """0.01 rad per step at the fastest rate."""
    return DEFAULT_PHASE_PER_STEP / p.max_rate()


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled rotating-frame amplitudes."""

    t: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    params: SystemParams
    config: IntegratorConfig
    dt: float
    final: ModeState = field(repr=False)

    @property
    def i1(self) -> np.ndarray:
        return self.a1.real**2 + self.a1.imag**2

    @property
    def i2(self) -> np.ndarray:
        return self.a2.real**2 + self.a2.imag**2

    @property
    def ib(self) -> np.ndarray:
        return self.b.real**2 + self.b.imag**2

    @property
    def phase_b(self) -> np.ndarray:
        return np.angle(self.b)

    @property
    def sample_interval(self) -> float:
        return self.dt * self.config.sample_stride

    def __len__(self):
        return len(self.t)


def mix_seed(master: int, index: int) -> int:
    """SplitMix64 output for counter ``index`` of the stream seeded by ``master``.

    The finalizer is a bijection on 64-bit words, so distinct indices give
    distinct seeds for a fixed master.
    """
    z = (master + (index + 1) * _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def noise_generator(seed: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed & _MASK64) | (stream << 64)))


def drift(s: ModeState, p: SystemParams) -> tuple[complex, complex, complex]:
    a1, a2, b = s.a1, s.a2, s.b
    g = p.g
    return (
        complex(-p.gamma1, -p.dw1) * a1 - 1j * g * a2 * b - 1j * p.omega_drive,
        complex(-p.gamma2, -p.dw2) * a2 - 1j * g * a1 * b.conjugate(),
        complex(-p.gammab, -p.wb) * b - 1j * g * a1 * a2.conjugate(),
    )


def noise_scale(p: SystemParams, dt: float) -> float:
    return math.sqrt(p.gammab * p.nbar * dt)


def noise_increment(p: SystemParams, dt: float, rng: np.random.Generator) -> complex:
    """One Wiener increment of the phonon noise over ``dt``; E|dW|^2 = 2 gammab nbar dt."""
    if p.nbar == 0:
        return 0j
    eta = rng.standard_normal(2)
    return noise_scale(p, dt) * complex(eta[0], eta[1])


def initial_state(p: SystemParams, cfg: IntegratorConfig, kick: Optional[float] = None) -> ModeState:
    """Zero solution plus one random kick on the phonon mode.

    The kick has the size of a single noise increment at occupation
    max(nbar, 1), so noiseless runs still leave the invariant a2 = b = 0 plane.
    It is drawn from its own stream and is therefore fixed by the seed.
    """
    dt = cfg.resolve_dt(p)
    if kick is None:
        kick = math.sqrt(p.gammab * max(p.nbar, 1.0) * dt)
    eta = noise_generator(cfg.seed, KICK_STREAM).standard_normal(2)
    return ModeState(zero_solution(p).a1, 0j, kick * complex(eta[0], eta[1]), 0.0)


@numba.njit(cache=True, nogil=True)
def _advance(state, coef, dt, noise, noisy, heun, stride, step0, out, pos):
    """Advance ``state`` in place over len(noise) (or n) steps.

    Returns (next free sample slot, index of failing step or -1).
    """
    a1 = state[0]
    a2 = state[1]
    b = state[2]
    l1 = coef[0]
    l2 = coef[1]
    lb = coef[2]
    g = coef[3].real
    drive = coef[4]
    guard = 1e24
    n = noise.shape[0]
    for i in range(n):
        f1 = l1 * a1 - 1j * g * a2 * b + drive
        f2 = l2 * a2 - 1j * g * a1 * np.conj(b)
        f3 = lb * b - 1j * g * a1 * np.conj(a2)
        dw = noise[i] if noisy else 0j
        if heun:
            p1 = a1 + f1 * dt
            p2 = a2 + f2 * dt
            p3 = b + f3 * dt + dw
            h1 = l1 * p1 - 1j * g * p2 * p3 + drive
            h2 = l2 * p2 - 1j * g * p1 * np.conj(p3)
            h3 = lb * p3 - 1j * g * p1 * np.conj(p2)
            a1 = a1 + 0.5 * dt * (f1 + h1)
            a2 = a2 + 0.5 * dt * (f2 + h2)
            b = b + 0.5 * dt * (f3 + h3) + dw
        else:
            a1 = a1 + dt * f1
            a2 = a2 + dt * f2
            b = b + dt * f3 + dw
        m = max(a1.real * a1.real + a1.imag * a1.imag,
                a2.real * a2.real + a2.imag * a2.imag,
                b.real * b.real + b.imag * b.imag)
        if not (m <= guard):
            state[0] = a1
            state[1] = a2
            state[2] = b
            return pos, i
        if (step0 + i + 1) % stride == 0:
            out[pos, 0] = a1
            out[pos, 1] = a2
            out[pos, 2] = b
            pos += 1
    state[0] = a1
    state[1] = a2
    state[2] = b
    return pos, -1


_CHUNK = 1 << 16


def _coefficients(p: SystemParams) -> np.ndarray:
    return np.array(
        [
            complex(-p.gamma1, -p.dw1),
            complex(-p.gamma2, -p.dw2),
            complex(-p.gammab, -p.wb),
            complex(p.g, 0.0),
            complex(0.0, -p.omega_drive),
        ]
    )


def integrate(p: SystemParams, s0: ModeState, cfg: IntegratorConfig) -> Trajectory:
    """Integrate from ``s0`` for ``cfg.t_end`` and sample every ``cfg.sample_stride`` steps.

    Bit-for-bit reproducible for fixed (p, s0, cfg). Raises
    :class:`NumericalBlowup` if an amplitude leaves the overflow guard.
    """
    dt = cfg.resolve_dt(p)
    n_steps = cfg.n_steps(p)
    stride = cfg.sample_stride
    noisy = cfg.noise_on and p.nbar > 0
    heun = cfg.scheme is Scheme.STOCHASTIC_HEUN

    out = np.empty((n_steps // stride + 1, 3), dtype=np.complex128)
    out[0] = (s0.a1, s0.a2, s0.b)
    state = out[0].copy()
    coef = _coefficients(p)
    rng = noise_generator(cfg.seed, NOISE_STREAM)
    scale = noise_scale(p, dt)
    chunk = max(1, _CHUNK // stride) * stride

    pos, step = 1, 0
    while step < n_steps:
        n = min(chunk, n_steps - step)
        if noisy:
            eta = rng.standard_normal((n, 2))
            noise = scale * (eta[:, 0] + 1j * eta[:, 1])
            pos, fail = _advance(state, coef, dt, noise, True, heun, stride, step, out, pos)
        else:
            pos, fail = _advance(state, coef, dt, np.empty(n, np.complex128), False, heun, stride, step, out, pos)
        if fail >= 0:
            raise NumericalBlowup(s0.t + (step + fail + 1) * dt)
        step += n

    t = s0.t + dt * stride * np.arange(pos)
    final = ModeState(state[0], state[1], state[2], s0.t + n_steps * dt)
    return Trajectory(
        t=t,
        a1=out[:pos, 0].copy(),
        a2=out[:pos, 1].copy(),
        b=out[:pos, 2].copy(),
        params=p,
        config=replace(cfg, dt=dt),
        dt=dt,
        final=final,
    )
