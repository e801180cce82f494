"""Closed-form analysis of the three-mode optomechanical system.

Everything here is a pure function of a :class:`SystemParams` value. Rates and
detunings are in units of the reference frequency w0; amplitudes are mean-field
averages in the frame rotating at the drive frequency.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import (
    AsymmetricRates,
    BelowExistence,
    NegativeIntensity,
    ValidationError,
    ZeroVector,
)

#: gamma2 and gammab are treated as equal when they differ by at most this
#: fraction of the larger one.
SYMMETRIC_RATES_RTOL = 1e-12

#: Relative band around Omega_EP inside which the linearization is labelled
#: an exceptional point.
EP_RTOL = 1e-9

#: Relative magnitude tolerance used to confirm the band classification.
PT_TOL = 1e-6


class Symmetry(str, enum.Enum):
    PT_SYMMETRIC = "PTSymmetric"
    NON_PT_SYMMETRIC = "NonPTSymmetric"
    EXCEPTIONAL_POINT = "ExceptionalPoint"


class Regime(str, enum.Enum):
    ZERO_ONLY = "ZeroOnly"
    BISTABLE_BELOW_EP = "BistableBelowEP"
    BISTABLE_ABOVE_EP = "BistableAboveEP"
    NONZERO_ONLY = "NonzeroOnly"


class SteadyKind(str, enum.Enum):
    ZERO = "Zero"
    NONZERO_PLUS = "NonzeroPlus"
    NONZERO_MINUS = "NonzeroMinus"


class Branch(str, enum.Enum):
    PLUS = "Plus"
    MINUS = "Minus"


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, all in units of w0.

    ``g = 0`` is accepted so that decoupled-mode runs can be configured; the
    thresholds are then infinite.
    """

    gamma1: float
    gamma2: float
    gammab: float
    dw1: float
    dw2: float
    wb: float
    g: float
    omega_drive: float
    nbar: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f.name, f"expected a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f.name, "must be finite")
            object.__setattr__(self, f.name, float(value))
        for name in ("gamma1", "gamma2", "gammab"):
            if getattr(self, name) <= 0:
                raise ValidationError(name, "must be > 0")
        for name in ("g", "omega_drive", "nbar"):
            if getattr(self, name) < 0:
                raise ValidationError(name, "must be >= 0")

    @property
    def rates_symmetric(self) -> bool:
        return abs(self.gamma2 - self.gammab) <= SYMMETRIC_RATES_RTOL * max(self.gamma2, self.gammab)

    def max_rate(self) -> float:
        """Largest frequency or rate entering the linear part of the flow."""
        return max(abs(self.dw1), abs(self.dw2), abs(self.wb), self.gamma1, self.gamma2, self.gammab)


@dataclass(frozen=True)
class DerivedQuantities:
    kappa: complex
    delta: float
    gamma_common: Optional[float]


@dataclass(frozen=True)
class Thresholds:
    omega_ex: float
    omega_ep: float
    omega_th: float
    bistable: bool
    coexistence_window: Optional[tuple[float, float]]


@dataclass(frozen=True)
class LinearAnalysis:
    matrix: np.ndarray
    lambda_plus: complex
    lambda_minus: complex
    e_plus: np.ndarray
    e_minus: np.ndarray
    symmetry: Symmetry
    omega_ep: float
    # largest relative | |e1| - |e2| | over both eigenvectors
    magnitude_gap: float
    confirmed: bool


@dataclass(frozen=True)
class SteadyState:
    """Stationary solution.

    ``a1``, ``a2`` and ``b`` are the rotating-frame amplitudes at t = 0. For the
    nonzero branches ``a2`` rotates as exp(+i dw t) and ``b`` as exp(-i dw t),
    with dw the generation frequency; ``a1`` is constant.
    """

    kind: SteadyKind
    a1_intensity: float
    a2_intensity: float
    b_intensity: float
    generation_freq: float
    stable: bool
    a1: complex
    a2: complex
    b: complex

    def amplitudes_at(self, t: float) -> tuple[complex, complex, complex]:
        phase = cmath.exp(1j * self.generation_freq * t)
        return self.a1, self.a2 * phase, self.b / phase


def derived_quantities(p: SystemParams) -> DerivedQuantities:
    kappa = p.g * p.omega_drive / complex(p.gamma1, p.dw1)
    delta = 0.5 * (p.dw2 + p.wb)
    gamma = 0.5 * (p.gamma2 + p.gammab) if p.rates_symmetric else None
    return DerivedQuantities(kappa=kappa, delta=delta, gamma_common=gamma)


def _common_gamma(p: SystemParams) -> float:
    d = derived_quantities(p)
    if d.gamma_common is None:
        raise AsymmetricRates(
            f"gamma2 = {p.gamma2!r} and gammab = {p.gammab!r} differ; "
            "the closed forms require equal rates"
        )
    return d.gamma_common


def thresholds(p: SystemParams) -> Thresholds:
    gamma = _common_gamma(p)
    delta = 0.5 * (p.dw2 + p.wb)
    bistable = p.dw1 * delta > p.gamma1 * gamma
    if p.g == 0:
        inf = math.inf
        return Thresholds(inf, inf, inf, bistable, None)
    omega_ex = abs(p.dw1 * gamma + p.gamma1 * delta) / p.g
    omega_ep = math.hypot(p.gamma1, p.dw1) * abs(delta) / p.g
    omega_th = math.hypot(p.dw1 * gamma + p.gamma1 * delta, p.gamma1 * gamma - p.dw1 * delta) / p.g
    window = (omega_ex, omega_ep) if bistable and omega_ex < omega_ep else None
    return Thresholds(omega_ex, omega_ep, omega_th, bistable, window)


def linearization_matrix(p: SystemParams) -> np.ndarray:
    """Jacobian of (delta a2, delta b*) about the zero solution.

    Valid for unequal rates too; only the closed-form eigenpairs need them equal.
    """
    kappa = derived_quantities(p).kappa
    return np.array(
        [[complex(-p.gamma2, -p.dw2), -kappa], [-kappa.conjugate(), complex(-p.gammab, p.wb)]]
    )


def _split(p: SystemParams, omega_ep: float) -> complex:
    """sqrt(|kappa|^2 - Delta^2), evaluated through (Omega - Omega_EP)."""
    delta = 0.5 * (p.dw2 + p.wb)
    if p.g == 0:
        return cmath.sqrt(complex(-delta * delta, 0.0))
    om = p.omega_drive
    s2 = p.g**2 * (om - omega_ep) * (om + omega_ep) / (p.gamma1**2 + p.dw1**2)
    return cmath.sqrt(complex(s2, 0.0))


def _eigvec(kappa: complex, delta: float, mu: complex) -> np.ndarray:
    # Two algebraically equivalent forms; take the better conditioned one.
    first = np.array([1j * delta - mu, kappa.conjugate()])
    second = np.array([-kappa, 1j * delta + mu])
    v = first if np.linalg.norm(first) >= np.linalg.norm(second) else second
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroVector("eigenvector collapsed")
    v = v / norm
    # phase convention of the closed form: second component real and positive
    anchor = v[1] if abs(v[1]) > 0 else v[0]
    return v * (abs(anchor) / anchor)


def pt_classify(v, tol: float = 1e-8) -> Symmetry:
    """PT test for a two-component vector.

    PT swaps the components and conjugates; ``v`` maps onto a multiple of
    itself exactly when both components have equal magnitude.
    """
    v = np.asarray(v, dtype=complex)
    m1, m2 = abs(v[0]), abs(v[1])
    scale = max(m1, m2)
    if scale == 0.0:
        raise ZeroVector("cannot classify the zero vector")
    if abs(m1 - m2) <= tol * scale:
        return Symmetry.PT_SYMMETRIC
    return Symmetry.NON_PT_SYMMETRIC


def _magnitude_gap(v: np.ndarray) -> float:
    m1, m2 = abs(v[0]), abs(v[1])
    return abs(m1 - m2) / max(m1, m2)


def linearize_zero_solution(p: SystemParams) -> LinearAnalysis:
    gamma = _common_gamma(p)
    d = derived_quantities(p)
    kappa, delta = d.kappa, d.delta
    omega_ep = thresholds(p).omega_ep
    matrix = linearization_matrix(p)

    s = _split(p, omega_ep)
    centre = complex(-gamma, -0.5 * (p.dw2 - p.wb))
    lam_p, lam_m = centre + s, centre - s

    if kappa == 0 and s == 0:
        # diabolic point: decoupled, degenerate modes
        e_p = np.array([1.0 + 0j, 0j])
        e_m = np.array([0j, 1.0 + 0j])
    else:
        e_p = _eigvec(kappa, delta, s)
        e_m = _eigvec(kappa, delta, -s)

    om = p.omega_drive
    if (omega_ep == 0 and om == 0) or (
        math.isfinite(omega_ep) and abs(om - omega_ep) <= EP_RTOL * omega_ep
    ):
        symmetry = Symmetry.EXCEPTIONAL_POINT
    elif om > omega_ep:
        symmetry = Symmetry.PT_SYMMETRIC
    else:
        symmetry = Symmetry.NON_PT_SYMMETRIC

    gap = max(_magnitude_gap(e_p), _magnitude_gap(e_m))
    if symmetry is Symmetry.NON_PT_SYMMETRIC:
        confirmed = gap > PT_TOL
    else:
        confirmed = gap <= PT_TOL

    # cross-check against a generic solver away from the defective point
    if symmetry is not Symmetry.EXCEPTIONAL_POINT:
        generic = np.linalg.eigvals(matrix)
        ours = np.array([lam_p, lam_m])
        scale = np.linalg.norm(matrix)
        dev = min(
            np.max(np.abs(np.sort_complex(generic) - np.sort_complex(ours))),
            np.max(np.abs(generic - ours)),
            np.max(np.abs(generic[::-1] - ours)),
        )
        if dev > 1e-6 * scale:
            raise RuntimeError(f"closed-form eigenvalues disagree with numpy ({dev:.3g})")

    return LinearAnalysis(
        matrix=matrix,
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        e_plus=e_p,
        e_minus=e_m,
        symmetry=symmetry,
        omega_ep=omega_ep,
        magnitude_gap=gap,
        confirmed=confirmed,
    )


def generation_frequency(p: SystemParams) -> float:
    return (p.wb * p.gamma2 - p.dw2 * p.gammab) / (p.gamma2 + p.gammab)


def zero_solution(p: SystemParams) -> SteadyState:
    a1 = -1j * p.omega_drive / complex(p.gamma1, p.dw1)
    if p.rates_symmetric:
        stable = p.omega_drive < thresholds(p).omega_th
    else:
        stable = bool(np.max(np.linalg.eigvals(linearization_matrix(p)).real) < 0)
    return SteadyState(
        kind=SteadyKind.ZERO,
        a1_intensity=p.omega_drive**2 / (p.gamma1**2 + p.dw1**2),
        a2_intensity=0.0,
        b_intensity=0.0,
        generation_freq=0.0,
        stable=stable,
        a1=a1,
        a2=0j,
        b=0j,
    )


def nonzero_intensity(p: SystemParams, branch: Branch) -> float:
    """Common |a2|^2 = |b|^2 of the requested lasing branch (may be negative)."""
    gamma = _common_gamma(p)
    th = thresholds(p)
    if p.omega_drive < th.omega_ex:
        raise BelowExistence(f"Omega = {p.omega_drive:.6g} < Omega_ex = {th.omega_ex:.6g}")
    delta = 0.5 * (p.dw2 + p.wb)
    root = math.sqrt((p.omega_drive - th.omega_ex) * (p.omega_drive + th.omega_ex)) / p.g
    sign = 1.0 if Branch(branch) is Branch.PLUS else -1.0
    return sign * root + (p.dw1 * delta - p.gamma1 * gamma) / p.g**2


def nonzero_solution(p: SystemParams, branch: Branch | str = Branch.PLUS) -> SteadyState:
    branch = Branch(branch)
    if p.g == 0:
        raise BelowExistence("no lasing branch without coupling (g = 0)")
    intensity = nonzero_intensity(p, branch)
    if intensity < 0:
        raise NegativeIntensity(
            f"{branch.value} branch intensity {intensity:.6g} < 0; branch does not exist here"
        )
    dw = generation_frequency(p)

    # Stationary A1/A2 equations for real b are linear in (A1, A2).
    b = math.sqrt(intensity)
    lhs = np.array(
        [
            [complex(p.gamma1, p.dw1), 1j * p.g * b],
            [1j * p.g * b, complex(p.gamma2, p.dw2 + dw)],
        ]
    )
    a1, a2 = np.linalg.solve(lhs, np.array([-1j * p.omega_drive, 0j]))
    a1, a2 = complex(a1), complex(a2)

    th = thresholds(p)
    if branch is Branch.PLUS:
        if th.bistable:
            stable = p.omega_drive >= th.omega_ex
        else:
            stable = p.omega_drive >= th.omega_th
    else:
        stable = False
    kind = SteadyKind.NONZERO_PLUS if branch is Branch.PLUS else SteadyKind.NONZERO_MINUS
    return SteadyState(
        kind=kind,
        a1_intensity=abs(a1) ** 2,
        a2_intensity=intensity,
        b_intensity=intensity,
        generation_freq=dw,
        stable=stable,
        a1=a1,
        a2=a2,
        b=complex(b),
    )


def classify_regime(p: SystemParams) -> Regime:
    th = thresholds(p)
    om = p.omega_drive
    if om >= th.omega_th:
        return Regime.NONZERO_ONLY
    if th.bistable and om > th.omega_ex:
        return Regime.BISTABLE_BELOW_EP if om < th.omega_ep else Regime.BISTABLE_ABOVE_EP
    return Regime.ZERO_ONLY
