"""Parameter documents: loading, validation and conversion to model objects.

A document is a nested mapping with sections ``system``, ``protocol``,
``run`` and optionally ``sweep``. Frequencies are ordinary frequencies in Hz
(``omega/2pi``); they become angular only when model objects are built.
Any scalar may be written as a number in the base unit or as
``{value = ..., unit = "..."}``; detunings accept the relative units
``omega_b1``, ``omega_b2`` and ``kappa_a``.

Example (TOML)::

    [system]
    omega_a = 10e9
    omega_b1 = 17e6
    ...
    [protocol]
    delta_a = { value = -0.95, unit = "omega_b1" }
    drive1 = { power = 1.1e-3 }
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys

from .errors import ConfigError
from .model import TWO_PI, Cuboid, SystemParams
from .protocol import RunOptions, Scenario

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FREQUENCY_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
RELATIVE_UNITS = ("omega_b1", "omega_b2", "kappa_a")
TEMPERATURE_UNITS = {"k": 1.0, "mk": 1e-3}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
DRIVE_KEYS = {"field": "T", "power": "W", "rabi": "Hz"}

_FREQ = "frequency"
_DETUNING = "detuning"
_TEMP = "temperature"
_TIME = "time"
_NUMBER = "number"
_INT = "int"
_BOOL = "bool"

SCHEMA = {
    "system": {
        **{k: _FREQ for k in ("omega_a", "omega_b1", "omega_b2", "kappa_a", "kappa_m1", "kappa_m2",
                               "gamma_b1", "gamma_b2", "g1", "g2", "G01", "G02")},
        "temperature": _TEMP,
        "spin_density": _NUMBER,
        "magnet1": "cuboid",
        "magnet2": "cuboid",
    },
    "protocol": {
        "delta_a": _DETUNING,
        "delta_m1": _DETUNING,
        "delta_am2": _DETUNING,
        "delta_m2": _DETUNING,
        "drive1": "drive",
        "drive2": "drive",
    },
    "run": {
        "stage": ("step1", "step2", "full"),
        "search_time": _TIME,
        "dt": _TIME,
        "stride": _INT,
        "free_time": _TIME,
        "free_points": _INT,
        "tol": _NUMBER,
        "lyapunov_rtol": _NUMBER,
        "self_consistent": _BOOL,
        "mean_field": ("dynamic", "quasi_static"),
        "include_shift": _BOOL,
        "step_warning": ("warn", "error", "ignore"),
    },
}
REQUIRED = {
    "system": ("omega_a", "omega_b1", "omega_b2", "kappa_a", "kappa_m1", "kappa_m2",
               "gamma_b1", "gamma_b2", "g1", "g2", "G01", "G02", "temperature"),
    "protocol": ("delta_a", "delta_m1", "delta_am2", "drive1"),
}
QUANTITIES = ("E_b1m2", "E_b1a", "E_b1m1", "E_b1b2", "margin", "t_max", "E_max")
SWEEP_KEYS = ("kind", "axes", "quantities", "points")


def load_document(path) -> dict:
    """Read a TOML (or ``.json``) parameter document.

    ``OSError`` propagates unchanged (an I/O fault); syntax errors become
    :class:`ConfigError`.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        if str(path).endswith(".json"):
            return json.loads(raw.decode("utf-8"))
        return tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from exc


def document_hash(doc: dict) -> str:
    """SHA-256 of the canonical JSON form of a document."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _split_value(raw, where):
    if isinstance(raw, dict):
        if set(raw) - {"value", "unit"} or "value" not in raw:
            raise ConfigError(f"{where}: expected {{value, unit}}, got {raw}")
        return raw["value"], str(raw.get("unit", "")).strip()
    return raw, ""


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _resolve(raw, kind, where, system=None):
    value, unit = _split_value(raw, where)
    value = _number(value, where)
    key = unit.lower()
    if kind in (_FREQ, _DETUNING):
        if not unit:
            return value
        if key in FREQUENCY_UNITS:
            return value * FREQUENCY_UNITS[key]
        if kind == _DETUNING and key in RELATIVE_UNITS:
            return value * _resolve(system[key], _FREQ, f"system.{key}")
        raise ConfigError(f"{where}: unknown unit {unit!r}")
    if kind == _TEMP:
        if not unit:
            return value
        if key in TEMPERATURE_UNITS:
            return value * TEMPERATURE_UNITS[key]
        raise ConfigError(f"{where}: unknown temperature unit {unit!r}")
    if kind == _TIME:
        if not unit:
            return value
        if key in TIME_UNITS:
            return value * TIME_UNITS[key]
        raise ConfigError(f"{where}: unknown time unit {unit!r}")
    if unit:
        raise ConfigError(f"{where}: takes no unit")
    return value


def _check_entry(section, key, raw, system):
    where = f"{section}.{key}"
    kind = SCHEMA[section][key]
    if isinstance(kind, tuple):
        if raw not in kind:
            raise ConfigError(f"{where}: must be one of {', '.join(kind)}, got {raw!r}")
    elif kind == _BOOL:
        if not isinstance(raw, bool):
            raise ConfigError(f"{where}: expected true/false")
    elif kind == _INT:
        if isinstance(raw, bool) or not isinstance(raw, int) or raw < 1:
            raise ConfigError(f"{where}: expected a positive integer")
    elif kind == "cuboid":
        if not (isinstance(raw, (list, tuple)) and len(raw) == 3):
            raise ConfigError(f"{where}: expected [length, width, thickness] in meters")
        for x in raw:
            if _number(x, where) <= 0:
                raise ConfigError(f"{where}: dimensions must be positive")
    elif kind == "drive":
        if not isinstance(raw, dict) or len(raw) != 1 or next(iter(raw)) not in DRIVE_KEYS:
            raise ConfigError(f"{where}: expected exactly one of {', '.join(DRIVE_KEYS)}")
        if _number(next(iter(raw.values())), where) < 0:
            raise ConfigError(f"{where}: drive strength must be >= 0")
    else:
        _resolve(raw, kind, where, system)


def validate_document(doc: dict) -> dict:
    """Check a document against the schema; returns it unchanged or raises ConfigError."""
    if not isinstance(doc, dict):
        raise ConfigError("document must be a table")
    unknown = set(doc) - set(SCHEMA) - {"sweep"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    for section, keys in REQUIRED.items():
        if not isinstance(doc.get(section), dict):
            raise ConfigError(f"missing section [{section}]")
        missing = [k for k in keys if k not in doc[section]]
        if missing:
            raise ConfigError(f"[{section}] missing: {', '.join(missing)}")
    system = doc["system"]
    for section in SCHEMA:
        entries = doc.get(section, {})
        if not isinstance(entries, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, raw in entries.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            _check_entry(section, key, raw, system)
    if "sweep" in doc:
        _validate_sweep(doc["sweep"], doc)
    try:
        scenario, _, _ = build_scenario(doc)
        scenario.drive1_spec().rabi_frequency(scenario.params)
        scenario.drive2_spec(1.0).rabi_frequency(scenario.params)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return doc


def _validate_sweep(sweep, doc):
    if not isinstance(sweep, dict):
        raise ConfigError("[sweep] must be a table")
    unknown = set(sweep) - set(SWEEP_KEYS)
    if unknown:
        raise ConfigError(f"sweep: unknown keys {', '.join(sorted(unknown))}")
    kind = sweep.get("kind", "grid")
    if kind not in ("grid", "timeseries"):
        raise ConfigError(f"sweep.kind must be grid or timeseries, got {kind!r}")
    quantities = sweep.get("quantities", [])
    bad = [q for q in quantities if q not in QUANTITIES]
    if bad:
        raise ConfigError(f"sweep.quantities: unknown {', '.join(bad)}; choose from {', '.join(QUANTITIES)}")
    if kind == "timeseries":
        points = sweep.get("points", 201)
        if isinstance(points, bool) or not isinstance(points, int) or points < 2:
            raise ConfigError("sweep.points must be an integer >= 2")
        return
    axes = sweep.get("axes", [])
    if not 1 <= len(axes) <= 2:
        raise ConfigError("a grid sweep needs one or two axes")
    for i, axis in enumerate(axes):
        where = f"sweep.axes[{i}]"
        if not isinstance(axis, dict) or set(axis) - {"path", "start", "stop", "count", "unit", "scale"}:
            raise ConfigError(f"{where}: expected path, start, stop, count, unit, scale")
        path = axis.get("path", "")
        kind_of = path_kind(path)
        count = axis.get("count")
        if isinstance(count, bool) or not isinstance(count, int) or count < 2:
            raise ConfigError(f"{where}: count must be an integer >= 2")
        start = _number(axis.get("start"), where + ".start")
        stop = _number(axis.get("stop"), where + ".stop")
        scale = axis.get("scale", "linear")
        if scale not in ("linear", "log"):
            raise ConfigError(f"{where}: scale must be linear or log")
        if scale == "log" and (start <= 0 or stop <= 0):
            raise ConfigError(f"{where}: a log axis needs positive bounds")
        unit = axis.get("unit", "")
        if kind_of != "drive-strength":
            _resolve({"value": start, "unit": unit}, kind_of, where, doc["system"])


def path_kind(path: str) -> str:
    """Schema kind of a sweepable parameter path such as ``protocol.delta_a``."""
    parts = str(path).split(".")
    if len(parts) == 3 and parts[0] == "protocol" and parts[1] in ("drive1", "drive2") and parts[2] in DRIVE_KEYS:
        return "drive-strength"
    if len(parts) != 2 or parts[0] not in SCHEMA or parts[1] not in SCHEMA[parts[0]]:
        raise ConfigError(f"unknown parameter path {path!r}")
    kind = SCHEMA[parts[0]][parts[1]]
    if not isinstance(kind, str) or kind not in (_FREQ, _DETUNING, _TEMP, _TIME, _NUMBER):
        raise ConfigError(f"parameter {path!r} is not a sweepable number")
    return kind


def set_path(doc: dict, path: str, value: float, unit: str = "") -> dict:
    """Copy of ``doc`` with the parameter at ``path`` set to ``value`` (in ``unit``)."""
    out = copy.deepcopy(doc)
    parts = path.split(".")
    if path_kind(path) == "drive-strength":
        out["protocol"][parts[1]] = {parts[2]: float(value)}
        return out
    out.setdefault(parts[0], {})[parts[1]] = {"value": float(value), "unit": unit} if unit else float(value)
    return out


def build_system(doc: dict) -> SystemParams:
    s = doc["system"]
    hz = {k: _resolve(s[k], _FREQ, f"system.{k}") for k, kind in SCHEMA["system"].items()
          if kind == _FREQ}
    magnets = {k: Cuboid(*map(float, s[k])) for k in ("magnet1", "magnet2") if k in s}
    return SystemParams(
        omega_m1=TWO_PI * hz["omega_a"],
        omega_m2=TWO_PI * hz["omega_a"],
        temperature=_resolve(s["temperature"], _TEMP, "system.temperature"),
        spin_density=float(s["spin_density"]) if "spin_density" in s else None,
        **{k: TWO_PI * v for k, v in hz.items()},
        **magnets,
    )


def _drive(entry):
    (kind, value), = entry.items()
    return (kind, TWO_PI * float(value)) if kind == "rabi" else (kind, float(value))


def build_scenario(doc: dict) -> tuple[Scenario, RunOptions, str]:
    """Model objects for one parameter point: the scenario, run options and stage."""
    base = build_system(doc)
    p = doc["protocol"]
    system = doc["system"]

    def detuning(key):
        return TWO_PI * _resolve(p[key], _DETUNING, f"protocol.{key}", system)

    scenario = Scenario(
        base,
        delta_a=detuning("delta_a"),
        delta_m1=detuning("delta_m1"),
        delta_am2=detuning("delta_am2"),
        delta_m2=detuning("delta_m2") if "delta_m2" in p else None,
        drive1=_drive(p["drive1"]),
        drive2=_drive(p.get("drive2", {"power": 1.3e-3})),
    )
    r = dict(doc.get("run", {}))
    stage = r.pop("stage", "step1")
    for key in ("search_time", "dt", "free_time"):
        if key in r:
            r[key] = _resolve(r[key], _TIME, f"run.{key}")
    for key in ("tol", "lyapunov_rtol"):
        if key in r:
            r[key] = _resolve(r[key], _NUMBER, f"run.{key}")
    return scenario, RunOptions(**r), stage
