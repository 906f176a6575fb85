"""Two-step entanglement protocol.

Step 1: a continuous drive on magnon 1 builds a stationary five-mode Gaussian
state in which mechanics 1 is entangled with magnon 2. Step 2: a flattop pulse
on magnon 2 (red detuned by about its mechanical frequency) swaps that
entanglement onto the two mechanical modes. After the pulse the mechanics
evolve freely under their local baths.

At the switch from drive 1 to drive 2 the rotating frame changes from
``omega01`` to ``omega02``. The frame change is the identity at that instant,
so the covariance matrix and the classical means carry over unchanged and only
the detunings are re-referenced.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import InputError, NumericalError, UnphysicalStateError, UnstableSystemError
from .gaussian import (
    FIVE_MODE,
    PHYSICALITY_TOL,
    CovarianceMatrix,
    log_negativity,
    log_negativity_series,
    pair_indices,
    symplectic_form,
)
from .linear import (
    LYAPUNOV_RTOL,
    DriftSchedule,
    propagate_cm,
    propagate_constant,
    solve_lyapunov,
    stability_margin,
    step_grid,
)
from .model import (
    TWO_PI,
    ClassicalMeans,
    DriveSpec,
    ModelWarning,
    SystemParams,
    detunings,
    diffusion_matrix,
    drift_matrices,
    drift_matrix,
    effective_couplings,
    mean_field_coefficients,
    steady_state_means,
)

PAIRS = {"b1m2": ("b1", "m2"), "b1a": ("b1", "a"), "b1m1": ("b1", "m1"), "b1b2": ("b1", "b2")}
# relative one-step vs two-half-step discrepancy tolerated in the mean-field integration
TRAJECTORY_CHECK_TOL = 1e-6
TRAJECTORY_CHECK_STEPS = 200
STEPS_PER_PERIOD = 200


def entanglement_report(cm, tol: float = PHYSICALITY_TOL) -> dict[str, float]:
    """Log-negativities of the pairs (b1,m2), (b1,a), (b1,m1), (b1,b2)."""
    v = np.asarray(cm)
    out = {}
    for key, (x, y) in PAIRS.items():
        idx = pair_indices(FIVE_MODE, x, y)
        out[key] = log_negativity(v[np.ix_(idx, idx)], tol)
    return out


def _pair_series(stack, key, tol):
    idx = pair_indices(FIVE_MODE, *PAIRS[key])
    return log_negativity_series(stack[:, idx][:, :, idx], tol)


def _check_physical_stack(stack, tol, what, times=None):
    omega = symplectic_form(stack.shape[-1] // 2)
    low = np.linalg.eigvalsh(stack + 0.5j * omega).min(axis=-1)
    bad = np.flatnonzero(low < -tol)
    if bad.size:
        k = bad[0]
        when = f" at t = {times[k]:.6e} s" if times is not None else ""
        raise UnphysicalStateError(f"{what} produced an unphysical covariance matrix{when}", float(low[k]))


def default_step(params: SystemParams, omega0: float) -> float:
    """Step resolving the fastest rotating-frame frequency with ``STEPS_PER_PERIOD`` points."""
    delta_a, dm1, dm2 = detunings(params, omega0)
    fastest = max(abs(delta_a), abs(dm1), abs(dm2), params.omega_b1, params.omega_b2,
                  params.g1, params.g2, params.kappa_a)
    return TWO_PI / (STEPS_PER_PERIOD * fastest)


@dataclass(frozen=True)
class Step1Result:
    """Stationary state under the continuous drive on magnon 1."""

    means: ClassicalMeans
    drift: np.ndarray
    covariance: CovarianceMatrix
    entanglement: dict
    margin: float


def step1_steady_state(
    params: SystemParams,
    drive1: DriveSpec,
    self_consistent: bool = False,
    tol: float = PHYSICALITY_TOL,
    rtol: float = LYAPUNOV_RTOL,
) -> Step1Result:
    """Steady-state covariance matrix and entanglement report of step 1.

    Raises
    ------
    UnstableSystemError
        If the drift matrix has an eigenvalue with non-negative real part;
        ``.margin`` carries the largest real part.
    """
    if drive1.target != 1 or drive1.profile != "continuous":
        raise InputError("step 1 needs a continuous drive on magnon 1")
    means = steady_state_means(params, drive1, self_consistent=self_consistent)
    couplings = effective_couplings(params, drive1.omega0, means, include_shift=self_consistent)
    a = drift_matrix(params, couplings)
    margin = stability_margin(a)
    if margin >= 0:
        raise UnstableSystemError(margin)
    v = solve_lyapunov(a, diffusion_matrix(params), rtol=rtol)
    cm = CovarianceMatrix(v)
    return Step1Result(means, a, cm, entanglement_report(cm, tol), margin)


@dataclass(frozen=True)
class Trajectory:
    """Classical means sampled on a uniform grid; ``states`` rows follow
    :meth:`ClassicalMeans.to_vector`."""

    times: np.ndarray
    states: np.ndarray
    step_error: float

    def means(self, k: int) -> ClassicalMeans:
        return ClassicalMeans.from_vector(self.states[k])

    def magnon(self, j: int) -> np.ndarray:
        col = 2 * j
        return self.states[:, col] + 1j * self.states[:, col + 1]

    def position(self, j: int) -> np.ndarray:
        return self.states[:, 4 + 2 * j]


def _drive_on_steps(drive, h, n_steps):
    if drive.profile == "continuous":
        return n_steps
    return min(n_steps, int(round(drive.duration / h)))


def _integrate(params, drive, y0, h, n_steps):
    rabi = drive.rabi_frequency(params)
    pair = (rabi, 0.0) if drive.target == 1 else (0.0, rabi)
    on = mean_field_coefficients(params, drive.omega0, pair)
    n_on = _drive_on_steps(drive, h, n_steps)
    states = kernels.rk4_mean_field(y0, on, h, n_on)
    if n_on < n_steps:
        off = mean_field_coefficients(params, drive.omega0, (0.0, 0.0))
        tail = kernels.rk4_mean_field(states[-1], off, h, n_steps - n_on)
        states = np.concatenate([states, tail[1:]])
    return states


def classical_trajectory(
    params: SystemParams,
    drive: DriveSpec,
    init: ClassicalMeans,
    duration: float,
    dt: float,
) -> Trajectory:
    """Integrate the noise-free nonlinear mean-field equations over ``[0, duration]``.

    Fixed-step RK4 with step ``<= dt``. The first ``TRAJECTORY_CHECK_STEPS``
    steps are repeated at half the step; a relative discrepancy above
    ``TRAJECTORY_CHECK_TOL`` emits a :class:`ModelWarning`.

    Raises
    ------
    NumericalError
        If the state becomes non-finite; the message carries the time.
    """
    n_steps, h = step_grid(duration, dt)
    y0 = init.to_vector()
    states = _integrate(params, drive, y0, h, n_steps)
    times = np.arange(n_steps + 1) * h
    finite = np.all(np.isfinite(states), axis=1)
    if not finite.all():
        k = int(np.argmin(finite))
        raise NumericalError(f"mean-field integration blew up at t = {times[k]:.6e} s")

    n_check = min(n_steps, TRAJECTORY_CHECK_STEPS)
    fine = _integrate(params, drive, y0, 0.5 * h, 2 * n_check)[::2]
    scale = np.max(np.abs(states[: n_check + 1]))
    step_error = 0.0 if scale == 0 else float(np.max(np.abs(fine - states[: n_check + 1])) / scale)
    if step_error > TRAJECTORY_CHECK_TOL:
        warnings.warn(
            f"mean-field step {h:.3e} s looks too coarse (relative step-halving error {step_error:.2e})",
            ModelWarning,
            stacklevel=2,
        )
    return Trajectory(times, states, step_error)


@dataclass(frozen=True)
class Step2Result:
    """Covariance time series under the step-2 pulse, with its classical trajectory."""

    times: np.ndarray
    covariances: np.ndarray
    e_b1b2: np.ndarray
    e_b1m2: np.ndarray
    trajectory: Trajectory
    dt: float
    warnings: tuple = ()


def _escalate(messages, policy):
    if not messages or policy == "ignore":
        return
    if policy == "error":
        raise NumericalError("; ".join(messages))
    for msg in messages:
        warnings.warn(msg, ModelWarning, stacklevel=3)


def step2_evolve(
    params: SystemParams,
    drive2: DriveSpec,
    v0,
    init_means: ClassicalMeans,
    duration: float,
    dt: float,
    stride: int = 1,
    mean_field: str = "dynamic",
    include_shift: bool = True,
    tol: float = PHYSICALITY_TOL,
    step_warning: str = "warn",
) -> Step2Result:
    """Evolve the step-1 covariance matrix under the step-2 pulse.

    With ``mean_field="dynamic"`` the classical means start from
    ``init_means`` and follow the nonlinear mean-field equations, so the
    couplings ``G_j(t)`` and shifted detunings ``Delta_mj + G0j q_j(t)`` vary
    in time. ``mean_field="quasi_static"`` instead holds the means at the
    stationary values of the new drive for the whole pulse.
    ``include_shift=False`` drops the magnetostrictive detuning shift
    ``G0j q_j`` from the fluctuation drift.

    The drift is frozen at each step midpoint and the propagation is the
    time-ordered product of one-step exponentials. No stability is required.
    ``step_warning`` (``"warn"``, ``"error"`` or ``"ignore"``) decides what a
    failed step-size self-check does.
    """
    if drive2.target != 2:
        raise InputError("step 2 needs the drive on magnon 2")
    if step_warning not in ("warn", "error", "ignore"):
        raise InputError(f"unknown step_warning policy {step_warning!r}")
    n_steps, h = step_grid(duration, dt, stride)
    delta_a, dm1, dm2 = detunings(params, drive2.omega0)

    if mean_field == "dynamic":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ModelWarning)
            traj = classical_trajectory(params, drive2, init_means, n_steps * h, 0.5 * h)
        _escalate([str(w.message) for w in caught], step_warning)
        states = traj.states
    elif mean_field == "quasi_static":
        steady = steady_state_means(params, drive2.replace(profile="continuous", duration=None))
        states = np.tile(steady.to_vector(), (2 * n_steps + 1, 1))
        traj = Trajectory(np.arange(2 * n_steps + 1) * (0.5 * h), states, 0.0)
    else:
        raise InputError(f"unknown mean_field mode {mean_field!r}")

    shift = 1.0 if include_shift else 0.0
    m1 = states[:, 2] + 1j * states[:, 3]
    m2 = states[:, 4] + 1j * states[:, 5]
    root2 = math.sqrt(2.0)
    mats = drift_matrices(
        params,
        delta_a,
        dm1 + shift * params.G01 * states[:, 6],
        dm2 + shift * params.G02 * states[:, 8],
        1j * root2 * params.G01 * m1,
        1j * root2 * params.G02 * m2,
    )
    schedule = DriftSchedule.sampled(traj.times, mats)
    prop = propagate_cm(schedule, diffusion_matrix(params), np.asarray(v0), duration=n_steps * h,
                        dt=h, stride=stride, physical_tol=tol)
    _escalate(prop.warnings, step_warning)
    covs = prop.covariances
    _check_physical_stack(covs, tol, "step-2 propagation", prop.times)
    return Step2Result(
        prop.times,
        covs,
        _pair_series(covs, "b1b2", tol),
        _pair_series(covs, "b1m2", tol),
        traj,
        prop.dt,
        tuple(prop.warnings),
    )


class Peak(NamedTuple):
    """Maximum of a sampled series. ``found`` is False when the series is
    identically zero (no entanglement); ``boundary`` flags a maximum at either
    end of the grid, where no refinement is attempted."""

    t_max: float
    e_max: float
    index: int
    boundary: bool
    found: bool


def locate_peak(times, values) -> Peak:
    """Global maximum on the grid, refined by a parabola through the three
    bracketing samples (uniform spacing assumed)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.size < 1:
        raise InputError("times and values must be equal-length 1-D arrays")
    k = int(np.argmax(values))
    if not values[k] > 0:
        return Peak(math.nan, 0.0, -1, False, False)
    if k == 0 or k == values.size - 1:
        return Peak(float(times[k]), float(values[k]), k, True, True)
    y0, y1, y2 = values[k - 1 : k + 2]
    curvature = y0 - 2.0 * y1 + y2
    if curvature >= 0:
        return Peak(float(times[k]), float(y1), k, False, True)
    h = times[k + 1] - times[k]
    shift = 0.5 * (y0 - y2) / curvature
    return Peak(float(times[k] + shift * h), float(y1 - 0.25 * (y0 - y2) * shift), k, False, True)


def find_optimal_pulse_duration(
    params: SystemParams,
    drive2: DriveSpec,
    v0,
    init_means: ClassicalMeans,
    search_time: float,
    dt: float,
    **kwargs,
) -> Peak:
    """Pulse duration maximizing the mechanical entanglement over ``[0, search_time]``."""
    result = step2_evolve(params, drive2, v0, init_means, search_time, dt, **kwargs)
    return locate_peak(result.times, result.e_b1b2)


@dataclass(frozen=True)
class FreeEvolution:
    times: np.ndarray
    covariances: np.ndarray
    e_b1b2: np.ndarray


def free_evolution(params: SystemParams, v_start, times, omega0: Optional[float] = None,
                   tol: float = PHYSICALITY_TOL) -> FreeEvolution:
    """Evolution with every drive off: ``G_j = 0``, so the mechanics only see
    their own baths. ``times`` are measured from pulse-off; the constant-drift
    solution is exact at any spacing. ``omega0`` fixes the rotating frame of
    the optical and magnon blocks (default: the cavity frequency)."""
    omega0 = params.omega_a if omega0 is None else omega0
    delta_a, dm1, dm2 = detunings(params, omega0)
    a = drift_matrices(params, delta_a, dm1, dm2, 0j, 0j)
    times = np.asarray(times, dtype=float)
    covs = propagate_constant(a, diffusion_matrix(params), np.asarray(v_start), times, tol)
    _check_physical_stack(covs, tol, "free evolution", times)
    return FreeEvolution(times, covs, _pair_series(covs, "b1b2", tol))


@dataclass(frozen=True)
class Scenario:
    """The protocol in terms of detunings, as the figures are parameterized.

    ``base`` supplies every parameter except the magnon frequencies, which
    follow from the cavity frequency and the detunings:
    ``omega01 = omega_a - delta_a``, ``omega_m1 = omega01 + delta_m1``,
    ``omega_m2 = omega_a - delta_am2`` and ``omega02 = omega_m2 - delta_m2``.
    Drive strengths are ``(kind, value)`` pairs with kind ``field`` (T),
    ``power`` (W) or ``rabi`` (rad/s).
    """

    base: SystemParams
    delta_a: float
    delta_m1: float
    delta_am2: float
    delta_m2: Optional[float] = None
    drive1: tuple = ("power", 1.1e-3)
    drive2: tuple = ("power", 1.3e-3)

    @property
    def omega01(self) -> float:
        return self.base.omega_a - self.delta_a

    @property
    def params(self) -> SystemParams:
        return self.base.replace(omega_m1=self.omega01 + self.delta_m1,
                                 omega_m2=self.base.omega_a - self.delta_am2)

    @property
    def omega02(self) -> float:
        delta = self.base.omega_b2 if self.delta_m2 is None else self.delta_m2
        return self.params.omega_m2 - delta

    def drive1_spec(self) -> DriveSpec:
        kind, value = self.drive1
        return DriveSpec(1, self.omega01, **{kind: value})

    def drive2_spec(self, duration: float) -> DriveSpec:
        kind, value = self.drive2
        return DriveSpec(2, self.omega02, profile="flattop", duration=duration, **{kind: value})

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class RunOptions:
    """Numerical settings of a protocol run. ``dt=None`` picks :func:`default_step`."""

    search_time: float = 0.4e-6
    dt: Optional[float] = None
    stride: int = 1
    free_time: float = 0.0
    free_points: int = 201
    tol: float = PHYSICALITY_TOL
    lyapunov_rtol: float = LYAPUNOV_RTOL
    self_consistent: bool = False
    mean_field: str = "dynamic"
    include_shift: bool = True
    step_warning: str = "warn"


@dataclass(frozen=True)
class ProtocolResult:
    step1: Step1Result
    step2: Optional[Step2Result]
    peak: Optional[Peak]
    free: Optional[FreeEvolution]
    metadata: dict = field(default_factory=dict)


def run_protocol(scenario: Scenario, options: RunOptions = RunOptions(), stages: str = "full") -> ProtocolResult:
    """Run step 1, then (for ``stages`` ``step2``/``full``) the pulse and its
    optimum, then (for ``full`` with ``free_time > 0``) free evolution from
    the grid sample at the optimum."""
    if stages not in ("step1", "step2", "full"):
        raise InputError(f"unknown stage selector {stages!r}")
    params = scenario.params
    s1 = step1_steady_state(params, scenario.drive1_spec(), options.self_consistent,
                            options.tol, options.lyapunov_rtol)
    meta = {"step1_margin": s1.margin, "tol": options.tol, "lyapunov_rtol": options.lyapunov_rtol}
    if stages == "step1":
        return ProtocolResult(s1, None, None, None, meta)

    drive2 = scenario.drive2_spec(options.search_time)
    dt = options.dt if options.dt is not None else default_step(params, drive2.omega0)
    s2 = step2_evolve(params, drive2, s1.covariance, s1.means, options.search_time, dt,
                      stride=options.stride, mean_field=options.mean_field,
                      include_shift=options.include_shift, tol=options.tol,
                      step_warning=options.step_warning)
    peak = locate_peak(s2.times, s2.e_b1b2)
    meta.update(dt=s2.dt, stride=options.stride, mean_field=options.mean_field,
                include_shift=options.include_shift)
    free = None
    if stages == "full" and options.free_time > 0 and peak.found:
        times = np.linspace(0.0, options.free_time, options.free_points)
        free = free_evolution(params, s2.covariances[peak.index], times, drive2.omega0, options.tol)
    return ProtocolResult(s1, s2, peak, free, meta)
