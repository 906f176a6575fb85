"""Pinned sweep configurations for the figure scans.

Axis ranges are chosen around the optima (the source figures do not print
numeric bounds); grids default to 101 points per axis and 201 samples for
time series.
"""

from __future__ import annotations

import copy

from .errors import ConfigError

# reference system, ordinary frequencies in Hz
BASE_SYSTEM = {
    "omega_a": 10e9,
    "omega_b1": 17e6,
    "omega_b2": 12e6,
    "kappa_a": 1e6,
    "kappa_m1": 1e6,
    "kappa_m2": 1e6,
    "gamma_b1": 100.0,
    "gamma_b2": 100.0,
    "g1": 5e6,
    "g2": 1e6,
    "G01": 10.0,
    "G02": 10.0,
    "temperature": 0.01,
    "spin_density": 4.22e27,
    "magnet1": [13.7e-6, 3e-6, 1e-6],
    "magnet2": [16.4e-6, 3e-6, 1e-6],
}

BASE_PROTOCOL = {
    "delta_a": {"value": -0.95, "unit": "omega_b1"},
    "delta_m1": {"value": 0.95, "unit": "omega_b1"},
    "delta_am2": {"value": 0.9, "unit": "kappa_a"},
    "delta_m2": {"value": 1.0, "unit": "omega_b2"},
    # field amplitude of both drives (T); equivalent to about 1.1 mW and 1.3 mW
    "drive1": {"field": 4.8e-4},
    "drive2": {"field": 4.8e-4},
}

SEARCH_TIME = 0.4e-6
FREE_TIME = 20e-6


def base_document() -> dict:
    """Reference parameter document at the step-1 optimum."""
    return {
        "system": copy.deepcopy(BASE_SYSTEM),
        "protocol": copy.deepcopy(BASE_PROTOCOL),
        "run": {"stage": "step1", "search_time": SEARCH_TIME},
    }


def _axis(path, start, stop, unit, count):
    return {"path": path, "start": start, "stop": stop, "count": count, "unit": unit, "scale": "linear"}


def _fig3(quantity, n, second=("protocol.delta_m1", 0.5, 1.5, "omega_b1")):
    doc = base_document()
    doc["sweep"] = {
        "kind": "grid",
        "axes": [_axis("protocol.delta_a", -1.5, -0.5, "omega_b1", n), _axis(*second, n)],
        "quantities": [quantity, "margin"],
    }
    return doc


def _fig5_grid(axis, n):
    doc = base_document()
    doc["run"]["stage"] = "step2"
    doc["sweep"] = {"kind": "grid", "axes": [axis], "quantities": ["t_max", "E_max", "E_b1m2"]}
    return doc


def _fig5_series(stage, n):
    doc = base_document()
    doc["run"]["stage"] = stage
    if stage == "full":
        doc["run"]["free_time"] = FREE_TIME
        doc["run"]["free_points"] = n
    doc["sweep"] = {"kind": "timeseries", "points": n}
    return doc


PRESETS = {
    "fig3a": lambda n: _fig3("E_b1m2", n),
    "fig3b": lambda n: _fig3("E_b1m2", n, ("protocol.delta_am2", -5.0, 5.0, "kappa_a")),
    "fig3c": lambda n: _fig3("E_b1a", n),
    "fig3d": lambda n: _fig3("E_b1b2", n),
    "fig5a": lambda n: _fig5_grid(_axis("protocol.delta_m2", 0.5, 1.5, "omega_b2", n), n),
    "fig5b": lambda n: _fig5_series("step2", n),
    "fig5c": lambda n: _fig5_series("full", n),
    "fig5d": lambda n: _fig5_grid(_axis("system.temperature", 0.0, 0.25, "K", n), n),
}
SERIES_PRESETS = ("fig5b", "fig5c")


def preset(name: str, points: int | None = None) -> dict:
    """Sweep document for a named figure scan; ``points`` overrides the grid
    resolution (default 101 per axis, 201 for time series)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    if points is None:
        points = 201 if name in SERIES_PRESETS else 101
    if points < 2:
        raise ConfigError("a preset needs at least 2 points per axis")
    return PRESETS[name](points)
