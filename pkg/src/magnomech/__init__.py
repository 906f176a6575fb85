"""Simulation of Gaussian entanglement in a five-mode cavity magnomechanical system.

A continuous drive on one magnet prepares a stationary state in which its
vibration mode is entangled with the second magnon; a red-detuned flattop
pulse on the second magnet then transfers that entanglement to the two
mechanical modes.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    InputError,
    MagnomechError,
    NumericalError,
    UnphysicalStateError,
    UnstableSystemError,
)
from .gaussian import (
    FIVE_MODE,
    CovarianceMatrix,
    ModeLayout,
    is_physical,
    log_negativity,
    partial_transpose,
    reduce,
    symplectic_eigenvalues,
)
from .kernels import BACKEND
from .linear import (
    DriftSchedule,
    propagate_cm,
    propagate_constant,
    solve_lyapunov,
    stability_margin,
)
from .model import (
    ClassicalMeans,
    Cuboid,
    DriveSpec,
    SystemParams,
    diffusion_matrix,
    drift_matrix,
    field_from_power,
    rabi_frequency,
    steady_state_means,
    thermal_occupation,
)
from .protocol import (
    RunOptions,
    Scenario,
    classical_trajectory,
    find_optimal_pulse_duration,
    free_evolution,
    locate_peak,
    run_protocol,
    step1_steady_state,
    step2_evolve,
)

__all__ = [
    "__version__",
    "ConfigError",
    "InputError",
    "MagnomechError",
    "NumericalError",
    "UnphysicalStateError",
    "UnstableSystemError",
    "FIVE_MODE",
    "CovarianceMatrix",
    "ModeLayout",
    "is_physical",
    "log_negativity",
    "partial_transpose",
    "reduce",
    "symplectic_eigenvalues",
    "BACKEND",
    "DriftSchedule",
    "propagate_cm",
    "propagate_constant",
    "solve_lyapunov",
    "stability_margin",
    "ClassicalMeans",
    "Cuboid",
    "DriveSpec",
    "SystemParams",
    "diffusion_matrix",
    "drift_matrix",
    "field_from_power",
    "rabi_frequency",
    "steady_state_means",
    "thermal_occupation",
    "RunOptions",
    "Scenario",
    "classical_trajectory",
    "find_optimal_pulse_duration",
    "free_evolution",
    "locate_peak",
    "run_protocol",
    "step1_steady_state",
    "step2_evolve",
]
