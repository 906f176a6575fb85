import math

import numpy as np
import pytest
from scipy.constants import hbar, k as kB

from conftest import N_10GHZ_10MK, N_12MHZ_10MK, N_17MHZ_10MK
from magnomech.errors import InputError
from magnomech.gaussian import FIVE_MODE, log_negativity, pair_indices
from magnomech.linear import solve_lyapunov, stability_margin
from magnomech.model import (
    GYROMAGNETIC_RATIO,
    TWO_PI,
    ClassicalMeans,
    Cuboid,
    DriveSpec,
    EffectiveCouplings,
    ModelWarning,
    SystemParams,
    detunings,
    diffusion_matrix,
    drift_matrices,
    drift_matrix,
    effective_coupling,
    effective_couplings,
    field_from_power,
    mean_field_derivative,
    rabi_frequency,
    steady_state_means,
    thermal_occupation,
)

TWO_PI_MHZ = TWO_PI * 1e6


# --- thermal occupation ------------------------------------------------------

def test_thermal_zero_temperature():
    assert thermal_occupation(TWO_PI * 1e9, 0.0) == 0.0
    assert thermal_occupation(TWO_PI * 1e3, 0.0) == 0.0


def test_thermal_ln2_gives_one():
    T = 0.05
    omega = kB * T * math.log(2) / hbar
    assert math.isclose(thermal_occupation(omega, T), 1.0, rel_tol=1e-12)


@pytest.mark.parametrize("f, oracle", [(12e6, N_12MHZ_10MK), (17e6, N_17MHZ_10MK), (10e9, N_10GHZ_10MK)])
def test_thermal_against_extended_precision(f, oracle):
    assert math.isclose(thermal_occupation(TWO_PI * f, 0.01), oracle, rel_tol=1e-12)


def test_thermal_errors():
    with pytest.raises(InputError):
        thermal_occupation(0.0, 1.0)
    with pytest.raises(InputError):
        thermal_occupation(1.0, -1.0)


# --- drive conversions -------------------------------------------------------

def test_rabi_scaling():
    base = rabi_frequency(1e-4, 1e16)
    assert math.isclose(rabi_frequency(2e-4, 1e16), 2 * base)
    assert math.isclose(rabi_frequency(1e-4, 4e16), 2 * base)
    assert math.isclose(base, math.sqrt(5) / 4 * GYROMAGNETIC_RATIO * 1e8 * 1e-4)
    with pytest.raises(InputError):
        rabi_frequency(0.0, 1e16)


def test_power_scaling():
    assert math.isclose(field_from_power(4e-3, 1e-5, 3e-6), 2 * field_from_power(1e-3, 1e-5, 3e-6))


@pytest.mark.parametrize("power, length", [(1.1e-3, 13.7e-6), (1.3e-3, 16.4e-6)])
def test_power_round_trip(power, length):
    assert abs(field_from_power(power, length, 3e-6) / 4.8e-4 - 1) <= 0.05


def test_preset_drive_uses_geometry(reference_params, reference):
    drive = reference.drive1_spec()
    n = reference_params.spin_density * 13.7e-6 * 3e-6 * 1e-6
    assert drive.field == 4.8e-4
    assert math.isclose(drive.rabi_frequency(reference_params), rabi_frequency(4.8e-4, n))


def test_drive_spec_validation():
    with pytest.raises(InputError):
        DriveSpec(1, 1.0)
    with pytest.raises(InputError):
        DriveSpec(1, 1.0, field=1e-4, power=1e-3)
    with pytest.raises(InputError):
        DriveSpec(3, 1.0, rabi=1.0)
    with pytest.raises(InputError):
        DriveSpec(2, 1.0, rabi=1.0, profile="flattop")
    with pytest.raises(InputError):
        DriveSpec(2, 1.0, rabi=1.0, profile="gaussian")
    assert DriveSpec(2, 1.0, rabi=1.0, profile="flattop", duration=1e-7).duration == 1e-7


def test_field_drive_needs_geometry(reference_params):
    bare = reference_params.replace(spin_density=None)
    with pytest.raises(InputError):
        DriveSpec(1, 1.0, field=1e-4).rabi_frequency(bare)
    assert DriveSpec(1, 1.0, rabi=5.0).rabi_frequency(bare) == 5.0


# --- parameter record --------------------------------------------------------

def test_from_frequencies_converts(reference_params):
    p = SystemParams.from_frequencies(
        omega_a=10e9, omega_m1=10e9, omega_m2=10e9, omega_b1=12e6, omega_b2=17e6,
        kappa_a=1e6, kappa_m1=1e6, kappa_m2=1e6, gamma_b1=100, gamma_b2=100,
        g1=3e6, g2=3e6, G01=10, G02=10, temperature=0.01,
    )
    assert p.omega_b1 == TWO_PI * 12e6 and p.temperature == 0.01


def test_params_validation(reference_params):
    with pytest.raises(InputError):
        reference_params.replace(kappa_a=0.0)
    with pytest.raises(InputError):
        reference_params.replace(g1=-1.0)
    with pytest.raises(InputError):
        reference_params.replace(temperature=-0.1)
    with pytest.warns(ModelWarning, match="Q1"):
        reference_params.replace(gamma_b1=reference_params.omega_b1 / 10)


def test_cuboid():
    assert math.isclose(Cuboid(2.0, 3.0, 4.0).volume, 24.0)
    with pytest.raises(InputError):
        Cuboid(1.0, 0.0, 1.0)


# --- steady-state means ------------------------------------------------------

def linear_solve_oracle(p, drive, q=(0.0, 0.0)):
    """The 3x3 complex stationary system for (a, m1, m2) at fixed mechanical positions."""
    da, d1, d2 = detunings(p, drive.omega0)
    d1 += p.G01 * q[0]
    d2 += p.G02 * q[1]
    om = drive.rabi_frequency(p)
    m = np.array([
        [1j * da + p.kappa_a, 1j * p.g1, 1j * p.g2],
        [1j * p.g1, 1j * d1 + p.kappa_m1, 0],
        [1j * p.g2, 0, 1j * d2 + p.kappa_m2],
    ])
    rhs = np.zeros(3, complex)
    rhs[drive.target] = om
    return np.linalg.solve(m, rhs)


def test_means_match_linear_solve(reference_params, reference):
    drive = reference.drive1_spec()
    means = steady_state_means(reference_params, drive)
    a, m1, m2 = linear_solve_oracle(reference_params, drive)
    assert np.allclose([means.a, means.m1, means.m2], [a, m1, m2], rtol=1e-10, atol=0)
    assert means.p1 == means.p2 == 0.0
    assert math.isclose(means.q1, -reference_params.G01 * abs(m1) ** 2 / reference_params.omega_b1)


def test_means_drive_on_second_magnet(reference_params, reference):
    drive = DriveSpec(2, reference.omega02, field=4.8e-4)
    means = steady_state_means(reference_params, drive)
    assert np.allclose([means.a, means.m1, means.m2], linear_solve_oracle(reference_params, drive), rtol=1e-10)


def test_means_zero_drive(reference_params, reference):
    means = steady_state_means(reference_params, DriveSpec(1, reference.omega01, rabi=0.0))
    assert means == ClassicalMeans()


def test_means_single_magnet_limit(reference_params, reference):
    p = reference_params.replace(g2=0.0)
    drive = reference.drive1_spec()
    means = steady_state_means(p, drive)
    da, d1, _ = detunings(p, drive.omega0)
    om = drive.rabi_frequency(p)
    load = 1j * da + p.kappa_a
    expected = om * load / (p.g1**2 + (1j * d1 + p.kappa_m1) * load)
    assert means.m2 == 0
    assert np.isclose(means.m1, expected, rtol=1e-13)


def test_self_consistent_is_a_fixed_point(reference_params, reference):
    drive = reference.drive1_spec()
    means = steady_state_means(reference_params, drive, self_consistent=True)
    rate = mean_field_derivative(reference_params, drive, means).to_vector()
    assert np.abs(rate).max() < 1e-9 * drive.rabi_frequency(reference_params)
    oracle = linear_solve_oracle(reference_params, drive, (means.q1, means.q2))
    assert np.allclose([means.a, means.m1, means.m2], oracle, rtol=1e-9)


def test_self_consistent_shift_is_small(reference_params, reference):
    """The magnetostrictive shift G0<q> is negligible next to the detunings at the working points."""
    p = reference_params
    checks = [(reference.drive1_spec(), 1), (DriveSpec(2, reference.omega02, field=4.8e-4), 2)]
    for drive, j in checks:
        means = steady_state_means(p, drive, self_consistent=True)
        plain = effective_couplings(p, drive.omega0, means)
        shifted = effective_couplings(p, drive.omega0, means, include_shift=True)
        delta, tilde = (plain.delta_m1, shifted.delta_m1) if j == 1 else (plain.delta_m2, shifted.delta_m2)
        assert math.isclose(tilde - delta, p.bare_coupling(j) * means.position(j), rel_tol=1e-12)
        assert abs(tilde - delta) / abs(delta) < 1e-3


def test_weak_drive_warns(reference_params, reference):
    with pytest.warns(ModelWarning, match="linearization"):
        steady_state_means(reference_params, DriveSpec(1, reference.omega01, rabi=1.0))


def test_means_require_continuous_drive(reference_params, reference):
    with pytest.raises(InputError):
        steady_state_means(reference_params, reference.drive2_spec(1e-7))


# --- effective coupling -------------------------------------------------------

def test_effective_coupling_phase():
    assert effective_coupling(10.0, 0j) == 0
    g = effective_coupling(10.0, 3.0 + 0j)
    assert g.real == 0 and g.imag > 0
    assert math.isclose(g.imag, math.sqrt(2) * 30.0)


def test_effective_coupling_magnitude(reference_params, reference):
    means = steady_state_means(reference_params, reference.drive1_spec())
    g1 = abs(effective_couplings(reference_params, reference.omega01, means).G1) / TWO_PI_MHZ
    # strong-drive regime: MHz scale, approaching but below omega_b1 / 2pi
    assert 1.0 < g1 < reference_params.omega_b1 / TWO_PI_MHZ


# --- drift matrix ------------------------------------------------------------

def test_drift_decoupled_blocks(reference_params):
    p = reference_params
    a = drift_matrix(p, EffectiveCouplings(0j, 0j, 1.0, 2.0, 3.0))
    a_decoupled = drift_matrix(p.replace(g1=0.0, g2=0.0), EffectiveCouplings(0j, 0j, 1.0, 2.0, 3.0))
    for k, (kap, delta) in enumerate([(p.kappa_a, 1.0), (p.kappa_m1, 2.0), (p.kappa_m2, 3.0)]):
        assert np.array_equal(a_decoupled[2 * k : 2 * k + 2, 2 * k : 2 * k + 2], [[-kap, delta], [-delta, -kap]])
    assert np.array_equal(a[6:8, 6:8], [[0, p.omega_b1], [-p.omega_b1, -p.gamma_b1]])
    assert np.array_equal(a[8:, 8:], [[0, p.omega_b2], [-p.omega_b2, -p.gamma_b2]])
    off = a_decoupled.copy()
    for k in range(5):
        off[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = 0
    assert not off.any()


def test_drift_cavity_magnon_pattern(reference_params):
    p = reference_params
    a = drift_matrix(p, EffectiveCouplings(0j, 0j, 0.0, 0.0, 0.0))
    assert a[0, 3] == p.g1 and a[1, 2] == -p.g1 and a[2, 1] == p.g1 and a[3, 0] == -p.g1
    assert a[0, 5] == p.g2 and a[1, 4] == -p.g2 and a[4, 1] == p.g2 and a[5, 0] == -p.g2


def test_drift_imaginary_coupling_slots(reference_params):
    a = drift_matrix(reference_params, EffectiveCouplings(5j, 7j, 0.0, 0.0, 0.0))
    # purely imaginary G: only the Im-G slots are populated
    assert a[2, 6] == 0 and a[7, 3] == 0 and a[4, 8] == 0 and a[9, 5] == 0
    assert a[3, 6] == -5 and a[7, 2] == -5
    assert a[5, 8] == -7 and a[9, 4] == -7


def test_drift_real_coupling_slots(reference_params):
    a = drift_matrix(reference_params, EffectiveCouplings(5 + 0j, 0j, 0.0, 0.0, 0.0))
    assert a[2, 6] == -5 and a[7, 3] == 5 and a[3, 6] == 0 and a[7, 2] == 0


@pytest.mark.parametrize("slot", ["re1", "im1", "re2", "im2", "g1", "g2"])
def test_drift_linear_in_each_coupling(reference_params, slot):
    def build(x):
        g = {"re1": (x, 0, 0, 0), "im1": (0, x, 0, 0), "re2": (0, 0, x, 0), "im2": (0, 0, 0, x)}.get(slot, (0,) * 4)
        p = reference_params.replace(**{slot: abs(x)}) if slot in ("g1", "g2") else reference_params
        return drift_matrix(p, EffectiveCouplings(complex(g[0], g[1]), complex(g[2], g[3]), 1.0, 2.0, 3.0))

    a0, a1, a2, a3 = (build(x) for x in (0.0, 1.0, 2.0, 3.0))
    assert np.allclose(a2 - a1, a1 - a0, rtol=0, atol=1e-9)
    assert np.allclose(a3 - a2, a1 - a0, rtol=0, atol=1e-9)
    assert np.any(a1 != a0)


def test_drift_matrices_broadcast(reference_params):
    stack = drift_matrices(reference_params, 1.0, [2.0, 3.0], 4.0, [1j, 2j], 0.0)
    assert stack.shape == (2, 10, 10)
    single = drift_matrix(reference_params, EffectiveCouplings(2j, 0j, 1.0, 3.0, 4.0))
    assert np.array_equal(stack[1], single)


def test_reference_point_is_stable(reference_params, reference):
    drive = reference.drive1_spec()
    means = steady_state_means(reference_params, drive)
    a = drift_matrix(reference_params, effective_couplings(reference_params, drive.omega0, means))
    assert stability_margin(a) < 0


# --- diffusion matrix --------------------------------------------------------

def test_diffusion_zero_temperature(reference_params):
    p = reference_params.replace(temperature=0.0)
    k, km1, km2 = p.kappa_a, p.kappa_m1, p.kappa_m2
    assert np.array_equal(np.diag(diffusion_matrix(p)), [k, k, km1, km1, km2, km2, 0, p.gamma_b1, 0, p.gamma_b2])


def test_diffusion_position_entries_vanish(reference_params):
    for T in (0.0, 0.01, 1.0, 300.0):
        d = diffusion_matrix(reference_params.replace(temperature=T))
        assert d[6, 6] == 0.0 and d[8, 8] == 0.0
        assert np.count_nonzero(d - np.diag(np.diag(d))) == 0


def test_diffusion_occupations_at_10mK(reference_params):
    p = reference_params.replace(temperature=0.01)
    d = np.diag(diffusion_matrix(p))
    na = (d[0] / p.kappa_a - 1) / 2
    nb1 = (d[7] / p.gamma_b1 - 1) / 2
    nb2 = (d[9] / p.gamma_b2 - 1) / 2
    assert na < 1e-20
    assert 10 <= nb1 <= 30 and 10 <= nb2 <= 30


# --- structural properties ---------------------------------------------------

def test_decoupled_mechanics_are_thermal(reference_params, reference):
    p = reference_params.replace(G01=0.0, G02=0.0)
    drive = reference.drive1_spec()
    means = steady_state_means(p, drive)
    v = solve_lyapunov(drift_matrix(p, effective_couplings(p, drive.omega0, means)), diffusion_matrix(p))
    for j, idx in ((1, slice(6, 8)), (2, slice(8, 10))):
        n = thermal_occupation(p.mech_frequency(j), p.temperature)
        assert np.allclose(v[idx, idx], (n + 0.5) * np.eye(2), rtol=1e-9)
    assert np.allclose(v[:6, 6:], 0, atol=1e-9)
    assert np.allclose(v[6:8, 8:], 0, atol=1e-9)


def _pair_negativities(p, drive):
    means = steady_state_means(p, drive)
    v = solve_lyapunov(drift_matrix(p, effective_couplings(p, drive.omega0, means)), diffusion_matrix(p))
    out = {}
    for x, y in [("b1", "m2"), ("b1", "a"), ("b1", "m1"), ("b1", "b2"), ("b2", "m1"), ("b2", "a"), ("b2", "m2")]:
        idx = pair_indices(FIVE_MODE, x, y)
        out[x + y] = log_negativity(v[np.ix_(idx, idx)])
    return out


def test_relabel_symmetry(reference_params, reference):
    drive = reference.drive1_spec()
    original = _pair_negativities(reference_params, drive)
    swapped = _pair_negativities(reference_params.swapped(), drive.replace(target=2))
    assert original["b1m2"] > 0
    for a, b in [("b1m2", "b2m1"), ("b1a", "b2a"), ("b1m1", "b2m2")]:
        assert math.isclose(original[a], swapped[b], rel_tol=1e-8, abs_tol=1e-12)
    assert math.isclose(original["b1b2"], swapped["b1b2"], abs_tol=1e-12)


def test_swapped_is_involution(reference_params):
    assert reference_params.swapped().swapped() == reference_params
