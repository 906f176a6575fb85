"""Five-mode cavity magnomechanics: parameters, drive conversions, classical
mean fields and the drift/diffusion matrices of the linearized fluctuations.

All frequencies and rates are angular (rad/s). Mode order everywhere is
``(a, m1, m2, b1, b2)`` with interleaved quadratures.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import hbar, k as BOLTZMANN, mu_0

from . import _pycore
from .errors import InputError, NumericalError

TWO_PI = 2.0 * math.pi
# electron gyromagnetic ratio, gamma / 2pi = 28 GHz/T
GYROMAGNETIC_RATIO = TWO_PI * 28e9
# YIG spin density; not given with the protocol, literature value
YIG_SPIN_DENSITY = 4.22e27
MIN_QUALITY_FACTOR = 1e3
MIN_AMPLITUDE = 1e2


class ModelWarning(UserWarning):
    """A validity assumption of the linearized model is weak at these parameters."""


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation ``1 / (exp(hbar omega / k_B T) - 1)``; exactly 0 at T = 0."""
    if omega <= 0:
        raise InputError(f"frequency must be positive, got {omega}")
    if temperature < 0:
        raise InputError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    x = hbar * omega / (BOLTZMANN * temperature)
    if x > 700:
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def rabi_frequency(field: float, n_spins: float) -> float:
    """Drive Rabi frequency ``(sqrt5/4) gamma sqrt(N) B`` in rad/s."""
    if field <= 0 or n_spins < 1:
        raise InputError(f"need B > 0 and N >= 1, got B={field}, N={n_spins}")
    return math.sqrt(5.0) / 4.0 * GYROMAGNETIC_RATIO * math.sqrt(n_spins) * field


def field_from_power(power: float, length: float, width: float) -> float:
    """Drive field amplitude ``sqrt(2 mu0 P / (l w c))`` in tesla for a cuboid magnet."""
    if power <= 0 or length <= 0 or width <= 0:
        raise InputError("power, length and width must be positive")
    return math.sqrt(2.0 * mu_0 * power / (length * width * SPEED_OF_LIGHT))


@dataclass(frozen=True)
class Cuboid:
    """Magnet geometry in meters."""

    length: float
    width: float
    thickness: float

    def __post_init__(self):
        if min(self.length, self.width, self.thickness) <= 0:
            raise InputError(f"cuboid dimensions must be positive: {self}")

    @property
    def volume(self) -> float:
        return self.length * self.width * self.thickness


@dataclass(frozen=True)
class SystemParams:
    """Mode frequencies, couplings, dissipation rates (rad/s) and bath temperature (K).

    ``G01``/``G02`` are the bare magnomechanical couplings; ``g1``/``g2``
    the cavity-magnon couplings. Geometry and spin density are only needed
    when a drive is given as a field or a power.
    """

    omega_a: float
    omega_m1: float
    omega_m2: float
    omega_b1: float
    omega_b2: float
    kappa_a: float
    kappa_m1: float
    kappa_m2: float
    gamma_b1: float
    gamma_b2: float
    g1: float
    g2: float
    G01: float
    G02: float
    temperature: float
    magnet1: Optional[Cuboid] = None
    magnet2: Optional[Cuboid] = None
    spin_density: Optional[float] = None

    def __post_init__(self):
        for name in ("omega_a", "omega_m1", "omega_m2", "omega_b1", "omega_b2",
                     "kappa_a", "kappa_m1", "kappa_m2", "gamma_b1", "gamma_b2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InputError(f"{name} must be positive and finite, got {value}")
        for name in ("g1", "g2", "G01", "G02"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InputError(f"{name} must be >= 0, got {value}")
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise InputError(f"temperature must be >= 0, got {self.temperature}")
        if self.spin_density is not None and self.spin_density <= 0:
            raise InputError(f"spin density must be positive, got {self.spin_density}")
        for j in (1, 2):
            q = self.mech_frequency(j) / self.mech_damping(j)
            if q < MIN_QUALITY_FACTOR:
                warnings.warn(
                    f"mechanical Q{j} = {q:.3g} < {MIN_QUALITY_FACTOR:g}; "
                    "the Markovian Brownian-noise model is questionable",
                    ModelWarning,
                    stacklevel=3,
                )

    @classmethod
    def from_frequencies(cls, **values) -> "SystemParams":
        """Build from ordinary frequencies in Hz (``omega/2pi``); temperature,
        magnets and spin density pass through unchanged."""
        passthrough = {"temperature", "magnet1", "magnet2", "spin_density"}
        return cls(**{k: (v if k in passthrough else TWO_PI * v) for k, v in values.items()})

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def magnon_frequency(self, j: int) -> float:
        return (self.omega_m1, self.omega_m2)[_index(j)]

    def magnon_damping(self, j: int) -> float:
        return (self.kappa_m1, self.kappa_m2)[_index(j)]

    def mech_frequency(self, j: int) -> float:
        return (self.omega_b1, self.omega_b2)[_index(j)]

    def mech_damping(self, j: int) -> float:
        return (self.gamma_b1, self.gamma_b2)[_index(j)]

    def cavity_coupling(self, j: int) -> float:
        return (self.g1, self.g2)[_index(j)]

    def bare_coupling(self, j: int) -> float:
        return (self.G01, self.G02)[_index(j)]

    def magnet(self, j: int) -> Optional[Cuboid]:
        return (self.magnet1, self.magnet2)[_index(j)]

    def spin_count(self, j: int) -> float:
        geometry = self.magnet(j)
        if geometry is None or self.spin_density is None:
            raise InputError(f"magnet {j} needs geometry and spin_density to convert a field drive")
        return self.spin_density * geometry.volume

    def swapped(self) -> "SystemParams":
        """The same system with magnets (and their mechanics) relabelled 1 <-> 2."""
        return dataclasses.replace(
            self,
            omega_m1=self.omega_m2, omega_m2=self.omega_m1,
            omega_b1=self.omega_b2, omega_b2=self.omega_b1,
            kappa_m1=self.kappa_m2, kappa_m2=self.kappa_m1,
            gamma_b1=self.gamma_b2, gamma_b2=self.gamma_b1,
            g1=self.g2, g2=self.g1,
            G01=self.G02, G02=self.G01,
            magnet1=self.magnet2, magnet2=self.magnet1,
        )


def _index(j: int) -> int:
    if j not in (1, 2):
        raise InputError(f"magnet index must be 1 or 2, got {j}")
    return j - 1


@dataclass(frozen=True)
class DriveSpec:
    """Single microwave drive on magnon ``target`` at angular frequency ``omega0``.

    Exactly one of ``field`` (T), ``power`` (W) or ``rabi`` (rad/s) is set.
    ``profile`` is ``"continuous"`` or ``"flattop"``; a flattop pulse is on
    over ``[0, duration]`` with instantaneous edges.
    """

    target: int
    omega0: float
    field: Optional[float] = None
    power: Optional[float] = None
    rabi: Optional[float] = None
    profile: str = "continuous"
    duration: Optional[float] = None

    def __post_init__(self):
        _index(self.target)
        given = [x for x in (self.field, self.power, self.rabi) if x is not None]
        if len(given) != 1:
            raise InputError("set exactly one of field, power, rabi")
        if given[0] < 0 or not math.isfinite(given[0]):
            raise InputError(f"drive strength must be finite and >= 0, got {given[0]}")
        if self.profile not in ("continuous", "flattop"):
            raise InputError(f"unknown drive profile {self.profile!r}")
        if self.profile == "flattop" and not (self.duration and self.duration > 0):
            raise InputError("a flattop pulse needs a positive duration")

    def rabi_frequency(self, params: SystemParams) -> float:
        if self.rabi is not None:
            return self.rabi
        if self.field is not None:
            field = self.field
        else:
            geometry = params.magnet(self.target)
            if geometry is None:
                raise InputError(f"power drive on magnet {self.target} needs its geometry")
            field = field_from_power(self.power, geometry.length, geometry.width) if self.power else 0.0
        if field == 0.0:
            return 0.0
        return rabi_frequency(field, params.spin_count(self.target))

    def replace(self, **changes) -> "DriveSpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ClassicalMeans:
    """Mean amplitudes: complex ``a``, ``m1``, ``m2``; real mechanical ``q``, ``p``."""

    a: complex = 0j
    m1: complex = 0j
    m2: complex = 0j
    q1: float = 0.0
    p1: float = 0.0
    q2: float = 0.0
    p2: float = 0.0

    def magnon(self, j: int) -> complex:
        return (self.m1, self.m2)[_index(j)]

    def position(self, j: int) -> float:
        return (self.q1, self.q2)[_index(j)]

    def to_vector(self) -> np.ndarray:
        return np.array([self.a.real, self.a.imag, self.m1.real, self.m1.imag,
                         self.m2.real, self.m2.imag, self.q1, self.p1, self.q2, self.p2])

    @classmethod
    def from_vector(cls, y) -> "ClassicalMeans":
        y = [float(v) for v in y]
        return cls(complex(y[0], y[1]), complex(y[2], y[3]), complex(y[4], y[5]), *y[6:10])


@dataclass(frozen=True)
class EffectiveCouplings:
    """Linearized couplings ``G_j = i sqrt2 G0j <m_j>`` and the detunings used in the drift."""

    G1: complex
    G2: complex
    delta_a: float
    delta_m1: float
    delta_m2: float


def detunings(params: SystemParams, omega0: float) -> tuple[float, float, float]:
    """``(omega_a, omega_m1, omega_m2) - omega0``."""
    return (params.omega_a - omega0, params.omega_m1 - omega0, params.omega_m2 - omega0)


def effective_coupling(G0: float, mean_m: complex) -> complex:
    return 1j * math.sqrt(2.0) * G0 * mean_m


def _drive_vector(params, drive):
    omega = drive.rabi_frequency(params)
    return (omega, 0.0) if drive.target == 1 else (0.0, omega)


def _linear_means(params, delta_a, delta_t, drive_target, omega):
    """Closed-form steady state of the cavity-magnon sector for one driven magnon.

    ``delta_t`` holds the effective magnon detunings. With the drive on magnon
    ``k`` and the other magnon ``l``, ``c_j = g_j^2 + (i D_j + k_j)(i D_a + k_a)``:
    ``m_k = O L / (c_k - g_k^2 g_l^2 / c_l)``,
    ``m_l = -O L (g_k g_l / c_k) / (c_l - g_k^2 g_l^2 / c_k)``.
    """
    load = 1j * delta_a + params.kappa_a
    k = drive_target
    l = 3 - k
    gk, gl = params.cavity_coupling(k), params.cavity_coupling(l)
    ck = gk**2 + (1j * delta_t[k - 1] + params.magnon_damping(k)) * load
    cl = gl**2 + (1j * delta_t[l - 1] + params.magnon_damping(l)) * load
    mk = omega * load / (ck - gk**2 * gl**2 / cl)
    ml = -omega * load * (gk * gl / ck) / (cl - gk**2 * gl**2 / ck)
    m = (mk, ml) if k == 1 else (ml, mk)
    a = -1j * (params.g1 * m[0] + params.g2 * m[1]) / load
    return a, m[0], m[1]


def steady_state_means(
    params: SystemParams,
    drive: DriveSpec,
    self_consistent: bool = False,
    rtol: float = 1e-10,
    max_iter: int = 1000,
) -> ClassicalMeans:
    """Stationary mean fields under a continuous drive.

    With ``self_consistent=False`` the magnon detunings ignore the
    magnetostrictive shift ``G0 <q>``; otherwise the shift is iterated to a
    fixed point (relative change of both magnon amplitudes below ``rtol``).
    Mechanical means are ``p = 0``, ``q = -G0 |m|^2 / omega_b`` in both cases.

    Raises
    ------
    NumericalError
        If the fixed-point iteration has not converged after ``max_iter`` steps.
    """
    if drive.profile != "continuous":
        raise InputError("steady-state means need a continuous drive")
    delta_a, dm1, dm2 = detunings(params, drive.omega0)
    omega = drive.rabi_frequency(params)

    def positions(m1, m2):
        return (-params.G01 * abs(m1) ** 2 / params.omega_b1,
                -params.G02 * abs(m2) ** 2 / params.omega_b2)

    a, m1, m2 = _linear_means(params, delta_a, (dm1, dm2), drive.target, omega)
    if self_consistent:
        for _ in range(max_iter):
            q1, q2 = positions(m1, m2)
            shifted = (dm1 + params.G01 * q1, dm2 + params.G02 * q2)
            a_new, m1_new, m2_new = _linear_means(params, delta_a, shifted, drive.target, omega)
            change = max(_rel(m1_new, m1), _rel(m2_new, m2))
            a, m1, m2 = a_new, m1_new, m2_new
            if not np.isfinite(change):
                break
            if change < rtol:
                break
        else:
            raise NumericalError(
                f"self-consistent detuning did not converge in {max_iter} iterations "
                "(bistable or invalid regime)"
            )
        if not np.isfinite(change):
            raise NumericalError("self-consistent iteration diverged")
    q1, q2 = positions(m1, m2)
    means = ClassicalMeans(complex(a), complex(m1), complex(m2), q1, 0.0, q2, 0.0)
    if omega > 0 and max(abs(means.a), abs(means.magnon(drive.target))) < MIN_AMPLITUDE:
        warnings.warn(
            f"mean amplitudes |a|={abs(means.a):.3g}, |m{drive.target}|={abs(means.magnon(drive.target)):.3g} "
            "are not >> 1; linearization is questionable",
            ModelWarning,
            stacklevel=2,
        )
    return means


def _rel(new, old):
    scale = max(abs(new), abs(old))
    return 0.0 if scale == 0 else abs(new - old) / scale


def mean_field_coefficients(params: SystemParams, omega0: float, rabi: tuple[complex, complex]) -> np.ndarray:
    """Coefficient vector of the classical equations, in the layout the kernels expect."""
    delta_a, dm1, dm2 = detunings(params, omega0)
    o1, o2 = complex(rabi[0]), complex(rabi[1])
    return np.array([
        delta_a, dm1, dm2, params.kappa_a, params.kappa_m1, params.kappa_m2,
        params.g1, params.g2, params.G01, params.G02, params.omega_b1, params.omega_b2,
        params.gamma_b1, params.gamma_b2, o1.real, o1.imag, o2.real, o2.imag,
    ])


def mean_field_derivative(params: SystemParams, drive: DriveSpec, means: ClassicalMeans) -> ClassicalMeans:
    """Time derivative of the noise-free Langevin equations at ``means``."""
    coeffs = mean_field_coefficients(params, drive.omega0, _drive_vector(params, drive))
    return ClassicalMeans.from_vector(_pycore.mean_field_rhs(means.to_vector(), coeffs))


def effective_couplings(
    params: SystemParams, omega0: float, means: ClassicalMeans, include_shift: bool = False
) -> EffectiveCouplings:
    """Couplings and detunings for the drift matrix in the frame rotating at ``omega0``."""
    delta_a, dm1, dm2 = detunings(params, omega0)
    if include_shift:
        dm1 += params.G01 * means.q1
        dm2 += params.G02 * means.q2
    return EffectiveCouplings(
        effective_coupling(params.G01, means.m1),
        effective_coupling(params.G02, means.m2),
        delta_a, dm1, dm2,
    )


def drift_matrices(params: SystemParams, delta_a, delta_m1, delta_m2, G1, G2) -> np.ndarray:
    """Stack of 10x10 drift matrices; the detuning and coupling arguments broadcast."""
    delta_a, delta_m1, delta_m2, G1, G2 = np.broadcast_arrays(
        np.asarray(delta_a, float), np.asarray(delta_m1, float), np.asarray(delta_m2, float),
        np.asarray(G1, complex), np.asarray(G2, complex),
    )
    shape = delta_a.shape
    a = np.zeros(shape + (10, 10))
    ka, g1, g2 = params.kappa_a, params.g1, params.g2
    a[..., 0, 0] = a[..., 1, 1] = -ka
    a[..., 0, 1] = delta_a
    a[..., 1, 0] = -delta_a
    a[..., 0, 3] = g1
    a[..., 0, 5] = g2
    a[..., 1, 2] = -g1
    a[..., 1, 4] = -g2
    a[..., 2, 1] = g1
    a[..., 3, 0] = -g1
    a[..., 4, 1] = g2
    a[..., 5, 0] = -g2
    for j, dm, G in ((1, delta_m1, G1), (2, delta_m2, G2)):
        x, y = 2 * j, 2 * j + 1
        q, p = 4 + 2 * j, 5 + 2 * j
        km = params.magnon_damping(j)
        wb, gb = params.mech_frequency(j), params.mech_damping(j)
        a[..., x, x] = a[..., y, y] = -km
        a[..., x, y] = dm
        a[..., y, x] = -dm
        a[..., x, q] = -G.real
        a[..., y, q] = -G.imag
        a[..., q, p] = wb
        a[..., p, q] = -wb
        a[..., p, p] = -gb
        a[..., p, x] = -G.imag
        a[..., p, y] = G.real
    return a


def drift_matrix(params: SystemParams, couplings: EffectiveCouplings) -> np.ndarray:
    """The 10x10 drift matrix of the linearized quadrature fluctuations."""
    c = couplings
    return drift_matrices(params, c.delta_a, c.delta_m1, c.delta_m2, c.G1, c.G2)


def diffusion_matrix(params: SystemParams) -> np.ndarray:
    """Diagonal diffusion matrix; mechanical position entries are exactly zero."""
    T = params.temperature
    na = thermal_occupation(params.omega_a, T)
    nm1 = thermal_occupation(params.omega_m1, T)
    nm2 = thermal_occupation(params.omega_m2, T)
    nb1 = thermal_occupation(params.omega_b1, T)
    nb2 = thermal_occupation(params.omega_b2, T)
    da = params.kappa_a * (2 * na + 1)
    d1 = params.kappa_m1 * (2 * nm1 + 1)
    d2 = params.kappa_m2 * (2 * nm2 + 1)
    return np.diag([da, da, d1, d1, d2, d2,
                    0.0, params.gamma_b1 * (2 * nb1 + 1),
                    0.0, params.gamma_b2 * (2 * nb2 + 1)])
