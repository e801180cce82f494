"""Flat ``section.key = value`` run configuration.

Lines are ``key = value`` pairs; ``#`` starts a comment. Every key has a
documented type and default, unknown keys are rejected, and ``auto`` selects a
parameter-dependent default where one exists. :func:`dumps` writes every key
explicitly, and ``loads(dumps(cfg)) == cfg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional

from .analysis import AnalysisConfig
from .dynamics import IntegratorConfig, Scheme
from .errors import ParseError, PTSwitchError, ValidationError
from .experiments import SweepDirection
from .model import SystemParams

SCHEMA_VERSION = 1

_PARAM_FIELDS = tuple(f.name for f in fields(SystemParams))


@dataclass(frozen=True)
class EnsembleSettings:
    trajectories: int = 32
    workers: Optional[int] = None


@dataclass(frozen=True)
class SweepSettings:
    omega_min: Optional[float] = None  # auto: 0.5 * Omega_ex
    omega_max: Optional[float] = None  # auto: 1.2 * Omega_th
    points: int = 61
    direction: SweepDirection = SweepDirection.BOTH
    carry_state: bool = True
    settle: Optional[float] = None
    measure: Optional[float] = None
    kick: float = 1e-6


@dataclass(frozen=True)
class MapSettings:
    axis1: str = "omega_drive"
    axis1_min: float = 0.0
    axis1_max: float = 0.06
    axis1_points: int = 61
    axis2: str = "dw2"
    axis2_min: float = 0.0
    axis2_max: float = 0.01
    axis2_points: int = 41


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    integrator: IntegratorConfig
    analysis: AnalysisConfig = AnalysisConfig()
    initial_kick: Optional[float] = None
    ensemble: EnsembleSettings = EnsembleSettings()
    sweep: SweepSettings = SweepSettings()
    map: MapSettings = MapSettings()
    schema_version: int = SCHEMA_VERSION


# ---------------------------------------------------------------- value types


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _auto(inner: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str):
        return None if text.lower() == "auto" else inner(text)

    return parse


def _int(text: str) -> int:
    return int(text, 0)


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _positive_int(text: str) -> int:
    value = _int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _param_name(text: str) -> str:
    if text not in _PARAM_FIELDS:
        raise ValueError(f"must be one of {', '.join(_PARAM_FIELDS)}")
    return text


def _fmt(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


# key -> (parser, default). Defaults of None mean "auto" for auto-typed keys
# and "required" otherwise.
_REQUIRED = object()

SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "schema_version": (_int, SCHEMA_VERSION),
    **{f"params.{name}": (_float, _REQUIRED) for name in _PARAM_FIELDS if name != "nbar"},
    "params.nbar": (_float, 0.0),
    "integrator.dt": (_auto(_float), None),
    "integrator.t_end": (_float, 1e6),
    "integrator.scheme": (Scheme, Scheme.STOCHASTIC_HEUN),
    "integrator.seed": (_int, 0),
    "integrator.sample_stride": (_positive_int, 1),
    "integrator.noise_on": (_bool, True),
    "initial.kick": (_auto(_float), None),
    "analysis.window": (_auto(_float), None),
    "analysis.hi": (_float, 0.5),
    "analysis.lo": (_float, 0.1),
    "analysis.min_dwell": (_auto(_float), None),
    "ensemble.trajectories": (_positive_int, 32),
    "ensemble.workers": (_auto(_positive_int), None),
    "sweep.omega_min": (_auto(_float), None),
    "sweep.omega_max": (_auto(_float), None),
    "sweep.points": (_positive_int, 61),
    "sweep.direction": (SweepDirection, SweepDirection.BOTH),
    "sweep.carry_state": (_bool, True),
    "sweep.settle": (_auto(_float), None),
    "sweep.measure": (_auto(_float), None),
    "sweep.kick": (_float, 1e-6),
    "map.axis1": (_param_name, "omega_drive"),
    "map.axis1_min": (_float, 0.0),
    "map.axis1_max": (_float, 0.06),
    "map.axis1_points": (_positive_int, 61),
    "map.axis2": (_param_name, "dw2"),
    "map.axis2_min": (_float, 0.0),
    "map.axis2_max": (_float, 0.01),
    "map.axis2_points": (_positive_int, 41),
}


def _read_pairs(text: str, path=None) -> tuple[dict[str, str], dict[str, int]]:
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ParseError(f"empty key or value in {raw.strip()!r}", lineno, path)
        if key not in SCHEMA:
            raise ParseError(f"unknown key {key!r}", lineno, path)
        if key in values:
            raise ParseError(f"duplicate key {key!r} (first on line {lines[key]})", lineno, path)
        values[key], lines[key] = value, lineno
    return values, lines


def loads(text: str, path=None) -> RunConfig:
    raw, lines = _read_pairs(text, path)
    v: dict[str, Any] = {}
    for key, (parse, default) in SCHEMA.items():
        if key not in raw:
            if default is _REQUIRED:
                raise ValidationError(key, "is required")
            v[key] = default
            continue
        try:
            v[key] = parse(raw[key])
        except ValueError as exc:
            raise ValidationError(key, f"invalid value {raw[key]!r} on line {lines[key]} ({exc})") from None

    if v["schema_version"] != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"unsupported version {v['schema_version']}")

    def section(prefix, build):
        try:
            return build()
        except ValidationError as exc:
            key = f"{prefix}.{exc.field}"
            where = f" (line {lines[key]})" if key in lines else ""
            raise ValidationError(key, str(exc).split(": ", 1)[-1] + where) from None
        except PTSwitchError as exc:
            raise ValidationError(prefix, str(exc)) from None

    params = section("params", lambda: SystemParams(**{n: v[f"params.{n}"] for n in _PARAM_FIELDS}))
    integrator = section(
        "integrator",
        lambda: IntegratorConfig(
            t_end=v["integrator.t_end"],
            dt=v["integrator.dt"],
            scheme=v["integrator.scheme"],
            seed=v["integrator.seed"],
            sample_stride=v["integrator.sample_stride"],
            noise_on=v["integrator.noise_on"],
        ),
    )
    section("integrator", lambda: integrator.resolve_dt(params))
    analysis = section(
        "analysis",
        lambda: AnalysisConfig(
            window=v["analysis.window"], hi=v["analysis.hi"], lo=v["analysis.lo"],
            min_dwell=v["analysis.min_dwell"],
        ),
    )
    kick = v["initial.kick"]
    if kick is not None and kick < 0:
        raise ValidationError("initial.kick", "must be >= 0")
    if v["sweep.kick"] < 0:
        raise ValidationError("sweep.kick", "must be >= 0")
    sweep = SweepSettings(**{k.split(".", 1)[1]: v[k] for k in SCHEMA if k.startswith("sweep.")})
    if sweep.omega_min is not None and sweep.omega_max is not None and sweep.omega_max <= sweep.omega_min:
        raise ValidationError("sweep.omega_max", "must exceed sweep.omega_min")
    mp = MapSettings(**{k.split(".", 1)[1]: v[k] for k in SCHEMA if k.startswith("map.")})
    if mp.axis1 == mp.axis2:
        raise ValidationError("map.axis2", "must differ from map.axis1")
    return RunConfig(
        params=params,
        integrator=integrator,
        analysis=analysis,
        initial_kick=kick,
        ensemble=EnsembleSettings(v["ensemble.trajectories"], v["ensemble.workers"]),
        sweep=sweep,
        map=mp,
        schema_version=v["schema_version"],
    )


def _flatten(cfg: RunConfig) -> dict[str, Any]:
    out = {"schema_version": cfg.schema_version}
    out.update({f"params.{n}": getattr(cfg.params, n) for n in _PARAM_FIELDS})
    ic = cfg.integrator
    out.update({
        "integrator.dt": ic.dt,
        "integrator.t_end": ic.t_end,
        "integrator.scheme": ic.scheme,
        "integrator.seed": ic.seed,
        "integrator.sample_stride": ic.sample_stride,
        "integrator.noise_on": ic.noise_on,
        "initial.kick": cfg.initial_kick,
    })
    for name in ("window", "hi", "lo", "min_dwell"):
        out[f"analysis.{name}"] = getattr(cfg.analysis, name)
    out["ensemble.trajectories"] = cfg.ensemble.trajectories
    out["ensemble.workers"] = cfg.ensemble.workers
    for f in fields(SweepSettings):
        out[f"sweep.{f.name}"] = getattr(cfg.sweep, f.name)
    for f in fields(MapSettings):
        out[f"map.{f.name}"] = getattr(cfg.map, f.name)
    return out


def dumps(cfg: RunConfig) -> str:
    flat = _flatten(cfg)
    return "".join(f"{key} = {_fmt(flat[key])}\n" for key in SCHEMA)


def shipped_config(name: str) -> Path:
    return Path(str(resources.files("ptswitch") / "configs" / name))


def load_config(path) -> RunConfig:
    """Read and validate a config file.

    A bare file name that does not exist on disk is looked up among the
    configs shipped with the package (e.g. ``fig1.cfg``).
    """
    path = Path(path)
    if not path.exists() and path.parent == Path("."):
        candidate = shipped_config(path.name)
        if candidate.exists():
            path = candidate
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", path=path) from None
    return loads(text, path)
