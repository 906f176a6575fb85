"""Parameter sweeps over documents, with CSV/JSON emission.

Every grid point is an independent pure computation. Points are evaluated in
a process pool and gathered by index, so the output is row-major by axes and
does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__, kernels
from .config import QUANTITIES, build_scenario, document_hash, set_path, validate_document
from .errors import ConfigError, InputError, NumericalError, UnphysicalStateError, UnstableSystemError
from .linear import step_grid
from .protocol import default_step, run_protocol

STATUS_COLUMNS = ("stable", "margin", "error")


@dataclass(frozen=True)
class Axis:
    path: str
    start: float
    stop: float
    count: int
    unit: str = ""
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)

    @property
    def column(self) -> str:
        return f"{self.path}[{self.unit}]" if self.unit else self.path


@dataclass(frozen=True)
class SweepConfig:
    """A validated sweep: base document, axes, recorded quantities."""

    document: dict
    kind: str = "grid"
    axes: tuple = ()
    quantities: tuple = ()
    points: int = 201

    @classmethod
    def from_document(cls, doc: dict) -> "SweepConfig":
        validate_document(doc)
        sweep = doc.get("sweep")
        if sweep is None:
            raise ConfigError("document has no [sweep] section")
        base = {k: v for k, v in doc.items() if k != "sweep"}
        axes = tuple(Axis(a["path"], float(a["start"]), float(a["stop"]), int(a["count"]),
                          a.get("unit", ""), a.get("scale", "linear")) for a in sweep.get("axes", []))
        quantities = tuple(sweep.get("quantities", ())) or ("E_b1m2", "E_b1a", "E_b1m1", "E_b1b2")
        return cls(base, sweep.get("kind", "grid"), axes, quantities, int(sweep.get("points", 201)))

    def with_overrides(self, dt: Optional[float] = None, tol: Optional[float] = None) -> "SweepConfig":
        doc = json.loads(json.dumps(self.document))
        run = doc.setdefault("run", {})
        if dt is not None:
            run["dt"] = dt
        if tol is not None:
            run["tol"] = tol
        validate_document(doc)
        return SweepConfig(doc, self.kind, self.axes, self.quantities, self.points)


@dataclass
class SweepResult:
    columns: list
    rows: list
    provenance: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([row[k] for row in self.rows], dtype=float)


def _error_code(exc) -> str:
    if isinstance(exc, UnstableSystemError):
        return "unstable"
    if isinstance(exc, UnphysicalStateError):
        return "unphysical"
    if isinstance(exc, NumericalError):
        return "numerical"
    return "input"


def run_point(doc: dict, quantities=QUANTITIES) -> dict:
    """Evaluate one parameter point; physics failures are recorded, not raised.

    The record maps each requested quantity to a float (NaN when not
    available) plus ``stable``, ``margin`` and ``error`` (empty on success).
    """
    record = {q: math.nan for q in quantities}
    record.update(stable=False, margin=math.nan, error="")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scenario, options, stage = build_scenario(doc)
            result = run_protocol(scenario, options, stage)
    except UnstableSystemError as exc:
        record.update(margin=float(exc.margin), error="unstable")
        return record
    except (NumericalError, InputError) as exc:
        record["error"] = _error_code(exc)
        return record
    s1 = result.step1
    record.update(stable=True, margin=float(s1.margin))
    for key, value in s1.entanglement.items():
        name = "E_" + key
        if name in record:
            record[name] = float(value)
    if result.peak is not None:
        if "t_max" in record:
            record["t_max"] = float(result.peak.t_max)
        if "E_max" in record:
            record["E_max"] = float(result.peak.e_max)
    return record


def _point_task(args):
    doc, quantities = args
    return run_point(doc, quantities)


def grid_documents(config: SweepConfig):
    """Per-point documents in row-major order, with their axis coordinates."""
    grids = [axis.values() for axis in config.axes]
    mesh = np.meshgrid(*grids, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    docs = []
    for point in coords:
        doc = config.document
        for axis, value in zip(config.axes, point):
            doc = set_path(doc, axis.path, float(value), axis.unit)
        docs.append(doc)
    return coords, docs


def provenance(config: SweepConfig) -> dict:
    run = config.document.get("run", {})
    return {
        "config_hash": document_hash({"document": config.document, "kind": config.kind,
                                      "axes": [a.__dict__ for a in config.axes],
                                      "quantities": list(config.quantities), "points": config.points}),
        "version": __version__,
        "backend": kernels.BACKEND,
        "tolerances": {
            "physicality": run.get("tol", 1e-9),
            "lyapunov_rtol": run.get("lyapunov_rtol", 1e-8),
            "dt": run.get("dt"),
        },
    }


def run_sweep(config: SweepConfig, workers: int = 1) -> SweepResult:
    """Evaluate every grid point (row-major by axes)."""
    if config.kind != "grid":
        return run_timeseries(config)
    coords, docs = grid_documents(config)
    tasks = [(doc, config.quantities) for doc in docs]
    if workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (workers * 16))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_point_task, tasks, chunksize=chunk))
    else:
        records = [_point_task(t) for t in tasks]
    columns = [a.column for a in config.axes] + list(config.quantities)
    columns += [c for c in STATUS_COLUMNS if c not in columns]
    rows = []
    for point, rec in zip(coords, records):
        rows.append([float(x) for x in point] + [rec[c] for c in columns[len(config.axes):]])
    return SweepResult(columns, rows, provenance(config))


def run_timeseries(config: SweepConfig) -> SweepResult:
    """Step-2 entanglement versus pulse duration, followed (stage ``full``)
    by free evolution from the optimum. Columns: ``phase``, ``t``,
    ``E_b1b2``, ``E_b1m2`` (NaN during free evolution, where only the
    mechanical pair is tracked)."""
    scenario, options, stage = build_scenario(config.document)
    if stage == "step1":
        raise ConfigError("a time series needs run.stage = step2 or full")
    params = scenario.params
    dt = options.dt if options.dt is not None else default_step(params, scenario.omega02)
    n_fine, _ = step_grid(options.search_time, dt)
    stride = max(1, math.ceil(n_fine / (config.points - 1)))
    result = run_protocol(scenario, replace(options, dt=dt, stride=stride), stage)
    s2 = result.step2
    rows = [["pulse", float(t), float(e1), float(e2)] for t, e1, e2 in zip(s2.times, s2.e_b1b2, s2.e_b1m2)]
    if result.free is not None:
        t0 = float(s2.times[result.peak.index])
        rows += [["free", t0 + float(t), float(e), math.nan] for t, e in zip(result.free.times, result.free.e_b1b2)]
    prov = provenance(config)
    prov["t_max"] = result.peak.t_max
    prov["E_max"] = result.peak.e_max
    prov["dt"] = s2.dt
    prov["stride"] = stride
    return SweepResult(["phase", "t", "E_b1b2", "E_b1m2"], rows, prov)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def to_csv(result: SweepResult) -> str:
    """CSV text: one header row, floats in shortest round-trip form."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def to_json(result: SweepResult) -> str:
    """JSON text: records array plus the provenance block (non-finite numbers become null)."""
    records = [{c: _json_value(v) for c, v in zip(result.columns, row)} for row in result.rows]
    prov = {k: _json_value(v) for k, v in result.provenance.items()}
    return json.dumps({"records": records, "provenance": prov}, indent=1, sort_keys=False) + "\n"
