"""Result envelopes and their CSV / JSON renderings.

Every output carries the full config, code version, RNG algorithm and master
seed. The creation timestamp is the only field that differs between
otherwise identical runs; it lives in the header, never in the payload.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, dumps
from .dynamics import RNG_ALGORITHM

UNITS = "frequencies and rates in units of w0; time in 1/w0; intensities dimensionless"

TRAJECTORY_COLUMNS = ("t", "re_a1", "im_a1", "re_a2", "im_a2", "re_b", "im_b", "i1", "i2", "ib", "ratio")
SWEEP_COLUMNS = (
    "omega", "mean_i1", "mean_i2", "mean_ib", "mean_ratio", "occ_sym", "occ_nonsym",
    "analytic_i2_plus", "omega_ex", "omega_ep", "omega_th",
)


@dataclass
class ResultEnvelope:
    kind: str
    config: RunConfig
    master_seed: int
    columns: Sequence[str]
    rows: Any  # 2-D array-like, one row per record
    extra: dict | None = None
    created: str | None = None

    def __post_init__(self):
        if self.created is None:
            self.created = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

    def provenance(self) -> dict:
        return {
            "kind": self.kind,
            "code_version": __version__,
            "rng_algorithm": RNG_ALGORITHM,
            "master_seed": self.master_seed,
            "units": UNITS,
            "created": self.created,
            "config": dumps(self.config).splitlines(),
        }


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def to_csv(env: ResultEnvelope) -> str:
    lines = [f"# ptswitch {env.kind} result"]
    prov = env.provenance()
    for key in ("units", "code_version", "rng_algorithm", "master_seed", "created"):
        lines.append(f"# {key}: {prov[key]}")
    lines.extend(f"# config: {line}" for line in prov["config"])
    lines.append(",".join(env.columns))
    for row in env.rows:
        if isinstance(row, str):
            lines.append(row)
        else:
            lines.append(",".join(format_number(x) for x in row))
    return "\n".join(lines) + "\n"


def csv_payload(text: str) -> str:
    """The data part of a CSV document (header comments stripped)."""
    return "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))


def jsonable(x):
    if isinstance(x, dict):
        return {str(getattr(k, "value", k)): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [jsonable(float(x.real)), jsonable(float(x.imag))]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if hasattr(x, "value"):
        return x.value
    return x


def to_json(env: ResultEnvelope) -> str:
    doc = {
        "provenance": env.provenance(),
        "payload": {
            "columns": list(env.columns),
            "data": [row for row in jsonable(list(env.rows)) if not isinstance(row, str)],
        },
    }
    if env.extra:
        doc["payload"].update(jsonable(env.extra))
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def json_payload(text: str) -> str:
    return json.dumps(json.loads(text)["payload"], sort_keys=True)


def render(env: ResultEnvelope, fmt: str) -> str:
    return to_csv(env) if fmt == "csv" else to_json(env)
