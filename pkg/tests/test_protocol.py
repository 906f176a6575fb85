import math
import warnings

import numpy as np
import pytest
from scipy.constants import hbar, k as kB

from conftest import tmsv
from magnomech.errors import InputError, NumericalError, UnstableSystemError
from magnomech.gaussian import is_physical
from magnomech.model import (
    ClassicalMeans,
    DriveSpec,
    ModelWarning,
    SystemParams,
    steady_state_means,
)
from magnomech.protocol import (
    RunOptions,
    classical_trajectory,
    default_step,
    find_optimal_pulse_duration,
    free_evolution,
    locate_peak,
    run_protocol,
    step1_steady_state,
    step2_evolve,
)

# the variant of step 2 with a nonzero mechanical entanglement window
WINDOW = RunOptions(mean_field="quasi_static", include_shift=False)


@pytest.fixture(scope="module")
def step1(reference):
    return step1_steady_state(reference.params, reference.drive1_spec())


@pytest.fixture(scope="module")
def window_run(reference):
    return run_protocol(reference, WINDOW, stages="step2")


# --- step 1 ------------------------------------------------------------------

def test_step1_reference_point(step1):
    e = step1.entanglement
    assert set(e) == {"b1m2", "b1a", "b1m1", "b1b2"}
    assert e["b1m2"] > 0 and e["b1a"] > 0
    assert e["b1b2"] == 0.0
    assert step1.margin < 0
    assert is_physical(step1.covariance.matrix, 1e-9)


def test_step1_without_magnomechanics(reference):
    p = reference.params.replace(G01=0.0, G02=0.0)
    report = step1_steady_state(p, reference.drive1_spec()).entanglement
    assert all(v == 0.0 for v in report.values())


def test_step1_far_detuned_second_magnet(reference, step1):
    far = reference.replace(delta_am2=5 * reference.base.kappa_a)
    e = step1_steady_state(far.params, far.drive1_spec()).entanglement["b1m2"]
    assert e < 0.5 * step1.entanglement["b1m2"]


def test_step1_unstable_point_reports_margin(reference):
    # blue-side magnon 1 detuning: parametric gain exceeds the losses
    bad = reference.replace(delta_m1=-reference.base.omega_b1)
    with pytest.raises(UnstableSystemError) as info:
        step1_steady_state(bad.params, bad.drive1_spec())
    assert info.value.margin > 0


def test_step1_requires_continuous_drive_on_magnet_one(reference):
    with pytest.raises(InputError):
        step1_steady_state(reference.params, reference.drive2_spec(1e-7))
    with pytest.raises(InputError):
        step1_steady_state(reference.params, reference.drive1_spec().replace(target=2))


# --- classical trajectory ----------------------------------------------------

def test_trajectory_undriven_stays_zero(reference):
    drive = DriveSpec(2, reference.omega02, rabi=0.0, profile="flattop", duration=1e-7)
    traj = classical_trajectory(reference.params, drive, ClassicalMeans(), 1e-7, 1e-10)
    assert not traj.states.any()
    assert traj.step_error == 0.0


def test_trajectory_relaxes_to_linear_steady_state(reference):
    p = reference.params.replace(G01=0.0, G02=0.0)
    drive = DriveSpec(2, reference.omega02, field=4.8e-4)
    target = steady_state_means(p, drive)
    traj = classical_trajectory(p, drive, ClassicalMeans(), 20e-6, default_step(p, drive.omega0))
    end = traj.means(-1)
    for got, want in [(end.a, target.a), (end.m1, target.m1), (end.m2, target.m2)]:
        assert abs(got - want) <= 1e-8 * abs(target.m2)


def test_trajectory_step_halving_consistent(reference, step1):
    drive = reference.drive2_spec(0.2e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ModelWarning)
        traj = classical_trajectory(reference.params, drive, step1.means, 0.2e-6,
                                    default_step(reference.params, drive.omega0))
    assert traj.step_error < 1e-6
    assert traj.means(0) == step1.means


def test_trajectory_coarse_step_warns(reference, step1):
    drive = reference.drive2_spec(0.2e-6)
    with pytest.warns(ModelWarning, match="coarse"):
        classical_trajectory(reference.params, drive, step1.means, 0.2e-6, 2e-9)


def test_trajectory_blow_up_reports_time(reference):
    drive = reference.drive2_spec(1e-7)
    with np.errstate(all="ignore"), pytest.raises(NumericalError, match="t ="):
        classical_trajectory(reference.params, drive, ClassicalMeans(m2=1e160), 1e-7, 1e-10)


def test_trajectory_pulse_switches_off(reference):
    p = reference.params
    drive = DriveSpec(2, reference.omega02, rabi=1e10, profile="flattop", duration=50e-9)
    traj = classical_trajectory(p, drive, ClassicalMeans(), 100e-9, 1e-10)
    on, off = traj.times <= 50e-9, traj.times > 50e-9
    amp = np.abs(traj.magnon(2))
    # undriven tail only decays
    assert amp[off][-1] < amp[on][-1]


# --- step 2 ------------------------------------------------------------------

def test_handover_continuity(reference, step1):
    drive = reference.drive2_spec(20e-9)
    res = step2_evolve(reference.params, drive, step1.covariance.matrix, step1.means, 20e-9,
                       default_step(reference.params, drive.omega0))
    assert np.array_equal(res.covariances[0], step1.covariance.matrix)
    assert res.e_b1m2[0] == step1.entanglement["b1m2"]
    assert res.e_b1b2[0] == step1.entanglement["b1b2"]


def _zero_drive_run(reference, step1, duration=2e-6):
    p = reference.params
    drive = DriveSpec(2, reference.omega02, rabi=0.0, profile="flattop", duration=duration)
    return step2_evolve(p, drive, step1.covariance.matrix, step1.means, duration,
                        default_step(p, drive.omega0), stride=20)


def test_zero_drive_decays_without_mechanical_entanglement(reference, step1):
    res = _zero_drive_run(reference, step1)
    assert not res.e_b1b2.any()
    assert res.e_b1m2[-1] < 1e-3 * res.e_b1m2[0]


def test_zero_drive_decay_is_monotone(reference, step1):
    res = _zero_drive_run(reference, step1)
    assert np.all(np.diff(res.e_b1m2) <= 0)


def test_step2_all_states_physical(window_run):
    s2 = window_run.step2
    assert all(is_physical(v, 1e-9) for v in s2.covariances)
    assert np.all(s2.e_b1b2 >= 0) and np.all(s2.e_b1m2 >= 0)


def test_step2_options_validated(reference, step1):
    drive = reference.drive2_spec(1e-8)
    args = (reference.params, drive, step1.covariance.matrix, step1.means, 1e-8, 1e-10)
    with pytest.raises(InputError):
        step2_evolve(*args, mean_field="frozen")
    with pytest.raises(InputError):
        step2_evolve(*args, step_warning="loud")
    with pytest.raises(InputError):
        step2_evolve(reference.params, reference.drive1_spec(), *args[2:])


def test_step2_coarse_step_escalates(reference, step1):
    drive = reference.drive2_spec(40e-9)
    args = (reference.params, drive, step1.covariance.matrix, step1.means, 40e-9, 4e-9)
    with pytest.raises(NumericalError):
        step2_evolve(*args, step_warning="error")


# --- pulse-duration optimum --------------------------------------------------

def test_peak_monotone_series_is_boundary():
    t = np.linspace(0, 1, 11)
    peak = locate_peak(t, t**2)
    assert peak.boundary and peak.found and peak.t_max == 1.0 and peak.index == 10


def test_peak_no_entanglement():
    peak = locate_peak(np.linspace(0, 1, 5), np.zeros(5))
    assert not peak.found and math.isnan(peak.t_max) and peak.e_max == 0.0


@pytest.mark.parametrize("t0", [0.3123, 0.5, 0.71])
def test_peak_parabolic_refinement(t0):
    t = np.linspace(0, 1, 201)
    h = t[1] - t[0]
    values = 1.0 - ((t - t0) / 0.05) ** 2
    peak = locate_peak(t, np.maximum(values, 0))
    assert abs(peak.t_max - t0) <= 1e-3 * h
    assert math.isclose(peak.e_max, 1.0, rel_tol=1e-9)


def test_peak_symmetric_smooth(rng):
    t = np.linspace(0, 1, 401)
    h = t[1] - t[0]
    t0 = 0.4 + rng.uniform(0, h)
    peak = locate_peak(t, np.cos((t - t0) / 0.3) ** 2)
    assert abs(peak.t_max - t0) <= 1e-3 * h


def test_window_peak_inside_pulse(window_run):
    peak = window_run.peak
    s2 = window_run.step2
    assert peak.found and not peak.boundary
    assert s2.times[0] < peak.t_max < s2.times[-1]
    assert peak.t_max < 1e-6
    assert abs(peak.e_max - s2.e_b1b2.max()) <= 0.05 * s2.e_b1b2.max()


def test_find_optimal_matches_run(reference, step1, window_run):
    drive = reference.drive2_spec(WINDOW.search_time)
    peak = find_optimal_pulse_duration(reference.params, drive, step1.covariance.matrix, step1.means,
                                       WINDOW.search_time, window_run.step2.dt,
                                       mean_field="quasi_static", include_shift=False)
    assert peak == window_run.peak


def test_stride_doubling_keeps_t_max(reference, window_run):
    coarse = run_protocol(reference, RunOptions(mean_field="quasi_static", include_shift=False, stride=2),
                          stages="step2")
    assert abs(coarse.peak.t_max - window_run.peak.t_max) <= window_run.step2.dt


# --- free evolution ----------------------------------------------------------

def slow_mechanics(gamma, n_thermal, omega_b=1e4, ratio=1.0):
    """A record with slow mechanics so that ODE oracles stay cheap."""
    T = 0.0 if n_thermal == 0 else hbar * omega_b / (kB * math.log1p(1 / n_thermal))
    return SystemParams(
        omega_a=1e6, omega_m1=1e6, omega_m2=1e6, omega_b1=omega_b, omega_b2=ratio * omega_b,
        kappa_a=1e4, kappa_m1=1e4, kappa_m2=1e4, gamma_b1=gamma, gamma_b2=gamma,
        g1=1e3, g2=1e3, G01=0.0, G02=0.0, temperature=T,
    )


def embed_mechanics(v4):
    v = 0.5 * np.eye(10)
    v[6:, 6:] = v4
    return v


def test_free_evolution_lossless_is_constant():
    p = slow_mechanics(1e-9, 0, ratio=1.4)
    times = np.linspace(0, 0.05, 41)
    free = free_evolution(p, embed_mechanics(tmsv(0.4)), times)
    assert np.allclose(free.e_b1b2, 0.8, rtol=0, atol=1e-9)


def test_free_evolution_thermal_decay_envelope():
    gamma, n, r = 1.0, 4.0, 0.6
    p = slow_mechanics(gamma, n)
    times = np.linspace(0, 0.15, 151)
    free = free_evolution(p, embed_mechanics(tmsv(r)), times)
    # a TMSV through two identical thermal channels of transmissivity exp(-gamma t):
    # 2 nu_min = eta exp(-2r) + (1 - eta)(2N + 1)
    eta = np.exp(-gamma * times)
    oracle = np.maximum(0.0, -np.log(eta * np.exp(-2 * r) + (1 - eta) * (2 * n + 1)))
    assert np.allclose(free.e_b1b2, oracle, rtol=0, atol=1e-3)
    # the envelope is set by the thermalization rate gamma (2N + 1)
    death = times[np.argmax(free.e_b1b2 == 0)]
    expected = -np.log1p(-(1 - np.exp(-2 * r)) / (2 * n + 1 - np.exp(-2 * r))) / gamma
    assert abs(death - expected) <= 2 * (times[1] - times[0])


def test_free_evolution_states_physical(reference, window_run):
    s2 = window_run.step2
    v = s2.covariances[window_run.peak.index]
    free = free_evolution(reference.params, v, np.linspace(0, 2e-6, 21), reference.omega02)
    assert all(is_physical(c, 1e-9) for c in free.covariances)
    assert free.e_b1b2[0] == s2.e_b1b2[window_run.peak.index]


def test_full_run_chains_free_evolution(reference):
    opts = RunOptions(mean_field="quasi_static", include_shift=False, free_time=1e-6, free_points=11)
    res = run_protocol(reference, opts, stages="full")
    assert res.free is not None and res.free.times.size == 11
    assert res.free.e_b1b2[0] == res.step2.e_b1b2[res.peak.index]
    assert res.metadata["mean_field"] == "quasi_static"


def test_run_protocol_stage_selector(reference):
    only = run_protocol(reference, stages="step1")
    assert only.step2 is None and only.peak is None
    with pytest.raises(InputError):
        run_protocol(reference, stages="step3")
