"""Linear open-system machinery: stability, Lyapunov steady states and
time-ordered propagation of covariance matrices under ``dV/dt = AV + VA^T + D``.

Everything here works on plain ``(2n, 2n)`` arrays; mode bookkeeping lives
in :mod:`magnomech.gaussian`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from . import kernels
from .errors import InputError, NumericalError, UnphysicalStateError, UnstableSystemError
from .gaussian import PHYSICALITY_TOL, is_physical

LYAPUNOV_RTOL = 1e-8
# relative local error of one step vs two half steps above which a warning is recorded
STEP_CHECK_TOL = 1e-2


def stability_margin(a: np.ndarray) -> float:
    """Largest real part of the spectrum of ``a``; negative means stable."""
    return float(np.max(np.linalg.eigvals(np.asarray(a, dtype=float)).real))


def solve_lyapunov(a: np.ndarray, d: np.ndarray, rtol: float = LYAPUNOV_RTOL) -> np.ndarray:
    """Solve ``A V + V A^T = -D`` through the Kronecker-vectorized linear system.

    ``((I kron A) + (A kron I)) vec(V) = -vec(D)`` with column-major ``vec``.
    The result is symmetrized and its residual checked against
    ``rtol * ||D||_inf``.

    Raises
    ------
    UnstableSystemError
        If ``A`` has an eigenvalue with non-negative real part.
    NumericalError
        If the residual bound fails (the message carries the condition number).
    """
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or d.shape != a.shape:
        raise InputError(f"shape mismatch: A {a.shape}, D {d.shape}")
    margin = stability_margin(a)
    if margin >= 0:
        raise UnstableSystemError(margin)
    n = a.shape[0]
    eye = np.eye(n)
    k = np.kron(eye, a) + np.kron(a, eye)
    try:
        vec = scipy.linalg.solve(k, -d.reshape(-1, order="F"), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Lyapunov solve failed: {exc}") from exc
    v = vec.reshape((n, n), order="F")
    v = 0.5 * (v + v.T)
    residual = lyapunov_residual(a, v, d)
    scale = np.linalg.norm(d, np.inf)
    if not np.isfinite(residual) or residual > rtol * scale:
        cond = np.linalg.cond(k, 1)
        raise NumericalError(
            f"Lyapunov residual {residual:.3e} exceeds {rtol:.1e} * ||D|| = {rtol * scale:.3e} "
            f"(condition number {cond:.3e})"
        )
    return v


def lyapunov_residual(a, v, d) -> float:
    """``||A V + V A^T + D||_inf`` (maximum absolute row sum)."""
    return float(np.linalg.norm(a @ v + v @ a.T + d, np.inf))


def matrix_exponential(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(M t)`` by scaling and squaring with a Pade(6, 6) approximant."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    try:
        return kernels.expm_pade(m * t)
    except OverflowError as exc:
        raise NumericalError(str(exc)) from exc


@dataclass(frozen=True)
class SampledDrift:
    """Drift matrices sampled on an increasing time grid, linearly interpolated."""

    times: np.ndarray
    matrices: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        mats = np.asarray(self.matrices, dtype=float)
        if t.ndim != 1 or mats.ndim != 3 or mats.shape[0] != t.size or t.size < 2:
            raise InputError("sampled drift needs k >= 2 times and a (k, n, n) stack")
        if np.any(np.diff(t) <= 0):
            raise InputError("sample times must increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "matrices", mats)

    def at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        grid = self.times
        j = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, grid.size - 2)
        w = ((t - grid[j]) / (grid[j + 1] - grid[j]))[:, None, None]
        return (1.0 - w) * self.matrices[j] + w * self.matrices[j + 1]


DriftSource = Union[np.ndarray, SampledDrift]


@dataclass(frozen=True)
class Segment:
    start: float
    stop: float
    source: DriftSource


@dataclass(frozen=True)
class DriftSchedule:
    """Piecewise drift ``t -> A(t)`` over ``[0, T]`` from contiguous segments.

    Each segment holds either one constant matrix or a :class:`SampledDrift`.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise InputError("schedule needs at least one segment")
        if abs(segs[0].start) > 0:
            raise InputError("schedule must start at t = 0")
        for prev, nxt in zip(segs, segs[1:]):
            if not math.isclose(prev.stop, nxt.start, rel_tol=1e-12, abs_tol=1e-18):
                raise InputError(f"segments not contiguous at t = {prev.stop}")
        dims = set()
        for s in segs:
            if s.stop <= s.start:
                raise InputError(f"empty segment [{s.start}, {s.stop}]")
            src = s.source
            shape = src.matrices.shape[1:] if isinstance(src, SampledDrift) else np.shape(src)
            dims.add(tuple(shape))
        if len(dims) != 1:
            raise InputError(f"segments disagree on matrix shape: {dims}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, a, duration: float) -> "DriftSchedule":
        return cls((Segment(0.0, float(duration), np.asarray(a, dtype=float)),))

    @classmethod
    def sampled(cls, times, matrices) -> "DriftSchedule":
        src = SampledDrift(times, matrices)
        return cls((Segment(float(src.times[0]), float(src.times[-1]), src),))

    @property
    def duration(self) -> float:
        return self.segments[-1].stop

    @property
    def dim(self) -> int:
        src = self.segments[0].source
        return src.matrices.shape[1] if isinstance(src, SampledDrift) else np.shape(src)[0]

    def at(self, t) -> np.ndarray:
        """Drift at each time in ``t``; returns a ``(len(t), n, n)`` stack."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.dim, self.dim))
        stops = np.array([s.stop for s in self.segments])
        which = np.minimum(np.searchsorted(stops, t, side="left"), len(self.segments) - 1)
        for i, seg in enumerate(self.segments):
            sel = which == i
            if not np.any(sel):
                continue
            if isinstance(seg.source, SampledDrift):
                out[sel] = seg.source.at(t[sel])
            else:
                out[sel] = seg.source
        return out


@dataclass
class PropagationResult:
    times: np.ndarray
    covariances: np.ndarray
    dt: float
    step_error: float
    warnings: list[str] = field(default_factory=list)


def step_grid(duration: float, dt: float, stride: int = 1) -> tuple[int, float]:
    """Number of steps (a multiple of ``stride``) and the step actually used (``<= dt``)."""
    if dt <= 0 or duration <= 0:
        raise InputError(f"need positive duration and step, got T={duration}, dt={dt}")
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    n = math.ceil(duration / dt * (1 - 1e-12))
    n = stride * math.ceil(n / stride)
    return n, duration / n


def _check_initial(v0, tol):
    v0 = np.asarray(v0, dtype=float)
    report = is_physical(v0, tol)
    if not report.physical:
        raise UnphysicalStateError("initial covariance matrix is unphysical", report.min_eigenvalue)
    return v0


def propagate_cm(
    schedule: DriftSchedule,
    d: np.ndarray,
    v0: np.ndarray,
    duration: float | None = None,
    dt: float = 1e-3,
    stride: int = 1,
    method: str = "expm",
    physical_tol: float = PHYSICALITY_TOL,
) -> PropagationResult:
    """Advance ``V`` under a time-dependent drift.

    ``method="expm"`` (default) is the time-ordered product of one-step
    exponentials with the drift frozen at each step midpoint; the noise
    integral per step uses Simpson's rule, so for a constant drift the
    stationary point of the stepper matches the Lyapunov solution to O(dt^4). ``method="rk4"`` integrates
    ``dV/dt = A V + V A^T + D`` directly and serves as a cross-check.

    Samples are returned every ``stride`` steps, first and last included.
    The step is shrunk so that a whole number of strides fits ``duration``.
    """
    duration = schedule.duration if duration is None else float(duration)
    if duration > schedule.duration * (1 + 1e-12):
        raise InputError(f"schedule covers {schedule.duration} s, asked for {duration} s")
    n_steps, h = step_grid(duration, dt, stride)
    v0 = _check_initial(v0, physical_tol)
    d = np.asarray(d, dtype=float)
    result_warnings = []

    step_error = _first_step_error(schedule, d, v0, h)
    if step_error > STEP_CHECK_TOL:
        result_warnings.append(
            f"step {h:.3e} s looks too coarse: one step vs two half steps differ by "
            f"{step_error:.2e} of the step increment"
        )

    if method == "expm":
        mids = schedule.at((np.arange(n_steps) + 0.5) * h)
        try:
            covs = kernels.propagate_midpoint(mids, d, v0, h, stride)
        except OverflowError as exc:
            raise NumericalError(str(exc)) from exc
    elif method == "rk4":
        covs = _propagate_rk4(schedule, d, v0, h, n_steps, stride)
    else:
        raise InputError(f"unknown method {method!r}")
    if not np.all(np.isfinite(covs)):
        raise NumericalError("covariance propagation produced non-finite entries")
    times = np.arange(covs.shape[0]) * (stride * h)
    return PropagationResult(times, covs, h, step_error, result_warnings)


def _first_step_error(schedule, d, v0, h):
    full = kernels.propagate_midpoint(schedule.at([0.5 * h]), d, v0, h, 1)[-1]
    halves = kernels.propagate_midpoint(schedule.at([0.25 * h, 0.75 * h]), d, v0, 0.5 * h, 2)[-1]
    change = np.max(np.abs(full - v0))
    if change == 0.0:
        return 0.0
    return float(np.max(np.abs(full - halves)) / change)


def _propagate_rk4(schedule, d, v0, h, n_steps, stride):
    def f(a, v):
        av = a @ v
        return av + av.T + d

    t_nodes = np.arange(2 * n_steps + 1) * (0.5 * h)
    a_nodes = schedule.at(t_nodes)
    v = v0.copy()
    out = np.empty((n_steps // stride + 1,) + v.shape)
    out[0] = v
    for k in range(n_steps):
        a0, am, a1 = a_nodes[2 * k], a_nodes[2 * k + 1], a_nodes[2 * k + 2]
        k1 = f(a0, v)
        k2 = f(am, v + 0.5 * h * k1)
        k3 = f(am, v + 0.5 * h * k2)
        k4 = f(a1, v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        v = 0.5 * (v + v.T)
        if (k + 1) % stride == 0:
            out[(k + 1) // stride] = v
    return out


def propagate_constant(a, d, v0, times: Sequence[float], physical_tol: float = PHYSICALITY_TOL) -> np.ndarray:
    """Exact solution for a constant stable drift at arbitrary sample times.

    ``V(t) = M V0 M^T + V_inf - M V_inf M^T`` with ``M = exp(A t)``, where ``V_inf`` solves
    the Lyapunov equation. Exact for any spacing, so long free-evolution runs
    need no fine step.
    """
    a = np.asarray(a, dtype=float)
    v0 = _check_initial(v0, physical_tol)
    v_inf = solve_lyapunov(a, d)
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size,) + a.shape)
    for i, t in enumerate(times):
        m = matrix_exponential(a, t)
        # grouped so that t = 0 returns V0 exactly
        v = m @ v0 @ m.T + (v_inf - m @ v_inf @ m.T)
        out[i] = 0.5 * (v + v.T)
    return out
