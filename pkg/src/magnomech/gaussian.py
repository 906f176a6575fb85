"""Covariance-matrix algebra for multimode Gaussian states.

Quadratures are ``x = (a + a^dag)/sqrt(2)`` and ``p = i(a^dag - a)/sqrt(2)``,
so the vacuum covariance matrix is ``I/2``. Some texts use ``x = a + a^dag``
and a vacuum variance of 1; every threshold in this module (``2*nu`` in the
log-negativity, ``V + i/2 Omega >= 0``) assumes the 1/2 convention.

Modes are stored interleaved, ``(x_1, p_1, x_2, p_2, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError, UnphysicalStateError

PHYSICALITY_TOL = 1e-9
# -ln(2 nu) values this close to zero are reported as exactly zero
NEGATIVITY_CLAMP = 1e-12


@dataclass(frozen=True)
class ModeLayout:
    """Ordered mode labels; mode ``k`` owns quadrature rows ``2k`` and ``2k+1``."""

    labels: tuple[str, ...] = ("a", "m1", "m2", "b1", "b2")

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise InputError(f"duplicate mode labels in {self.labels}")
        if not self.labels:
            raise InputError("layout needs at least one mode")

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 2 * len(self.labels)

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"unknown mode {label!r}; layout has {self.labels}") from None

    def quadratures(self, label: str) -> tuple[int, int]:
        k = self.position(label)
        return 2 * k, 2 * k + 1


FIVE_MODE = ModeLayout()


@dataclass(frozen=True)
class CovarianceMatrix:
    """Real symmetric ``2n x 2n`` covariance matrix tied to a mode layout.

    The matrix is symmetrized on construction; asymmetry larger than
    ``sym_tol`` (relative to the largest entry) is rejected.
    """

    matrix: np.ndarray
    layout: ModeLayout = field(default=FIVE_MODE)
    sym_tol: float = field(default=1e-8, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.matrix, dtype=float)
        _check_square_even(v)
        if v.shape[0] != self.layout.dim:
            raise InputError(
                f"matrix is {v.shape[0]}x{v.shape[0]} but layout {self.layout.labels} "
                f"needs {self.layout.dim}"
            )
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.max(np.abs(v - v.T)) > self.sym_tol * scale:
            raise InputError("covariance matrix is not symmetric")
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "matrix", v)

    @classmethod
    def vacuum(cls, layout: ModeLayout = FIVE_MODE) -> "CovarianceMatrix":
        return cls(0.5 * np.eye(layout.dim), layout)

    @property
    def n_modes(self) -> int:
        return self.layout.n_modes

    def reduce(self, modes: Sequence[str]) -> "CovarianceMatrix":
        return reduce(self, modes)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


class PhysicalityReport(NamedTuple):
    physical: bool
    min_eigenvalue: float

    def __bool__(self):
        return self.physical


def _check_square_even(v):
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise InputError(f"expected a square matrix, got shape {v.shape}")
    if v.shape[0] % 2:
        raise InputError(f"expected even dimension, got {v.shape[0]}")


def _as_matrix(cm) -> np.ndarray:
    if isinstance(cm, CovarianceMatrix):
        return cm.matrix
    v = np.asarray(cm, dtype=float)
    _check_square_even(v)
    return v


def symplectic_form(n: int) -> np.ndarray:
    """Block-diagonal ``Omega_n`` with ``n`` blocks ``[[0, 1], [-1, 0]]``."""
    if n < 1:
        raise InputError(f"mode count must be >= 1, got {n}")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def reduce(cm: CovarianceMatrix, modes: Sequence[str]) -> CovarianceMatrix:
    """Keep only ``modes``, in the order they appear in the parent layout."""
    modes = list(modes)
    if len(set(modes)) != len(modes):
        raise InputError(f"duplicate modes requested: {modes}")
    layout = cm.layout
    positions = sorted(layout.position(m) for m in modes)
    idx = [q for k in positions for q in (2 * k, 2 * k + 1)]
    sub = cm.matrix[np.ix_(idx, idx)]
    return CovarianceMatrix(sub, ModeLayout(tuple(layout.labels[k] for k in positions)))


_PT = np.diag([1.0, -1.0, 1.0, 1.0])


def partial_transpose(cm4):
    """Flip the momentum sign of the first mode of a two-mode covariance matrix.

    Returns the same type it was given (array in, array out).
    """
    v = _as_matrix(cm4)
    if v.shape != (4, 4):
        raise InputError(f"partial transpose needs a 4x4 matrix, got {v.shape}")
    out = _PT @ v @ _PT
    if isinstance(cm4, CovarianceMatrix):
        return CovarianceMatrix(out, cm4.layout)
    return out


def symplectic_eigenvalues(cm) -> np.ndarray:
    """Ascending symplectic eigenvalues, each of the ``n`` pairs reported once.

    Uses the moduli of the spectrum of ``i Omega V``; no physicality check.
    """
    v = _as_matrix(cm)
    n = v.shape[0] // 2
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ v)))
    return 0.5 * (moduli[0::2] + moduli[1::2])


def is_physical(cm, tol: float = PHYSICALITY_TOL) -> PhysicalityReport:
    """True iff the smallest eigenvalue of ``V + (i/2) Omega`` is ``>= -tol``."""
    v = _as_matrix(cm)
    n = v.shape[0] // 2
    lo = float(np.linalg.eigvalsh(v + 0.5j * symplectic_form(n))[0])
    return PhysicalityReport(lo >= -tol, lo)


def log_negativity(cm4, tol: float = PHYSICALITY_TOL, clamp: bool = True) -> float:
    """Logarithmic negativity ``max(0, -ln 2 nu_min)`` of a two-mode state.

    ``nu_min`` is the smallest symplectic eigenvalue of the partially
    transposed matrix. With ``clamp=False`` the raw ``-ln 2 nu_min`` is
    returned, which is negative for separable states with margin.

    Raises
    ------
    UnphysicalStateError
        If ``cm4`` fails :func:`is_physical` at ``tol``.
    """
    v = _as_matrix(cm4)
    if v.shape != (4, 4):
        raise InputError(f"log-negativity needs a 4x4 matrix, got {v.shape}")
    report = is_physical(v, tol)
    if not report.physical:
        raise UnphysicalStateError("two-mode state is unphysical", report.min_eigenvalue)
    nu = symplectic_eigenvalues(partial_transpose(v))[0]
    raw = -np.log(2.0 * nu)
    if not clamp:
        return float(raw)
    return float(raw) if raw > NEGATIVITY_CLAMP else 0.0


def log_negativity_series(stack: np.ndarray, tol: float = PHYSICALITY_TOL) -> np.ndarray:
    """Vectorized :func:`log_negativity` over a ``(k, 4, 4)`` stack."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[1:] != (4, 4):
        raise InputError(f"expected a (k, 4, 4) stack, got {stack.shape}")
    omega = symplectic_form(2)
    lo = np.linalg.eigvalsh(stack + 0.5j * omega)[:, 0]
    bad = np.flatnonzero(lo < -tol)
    if bad.size:
        raise UnphysicalStateError(f"sample {bad[0]} of the series is unphysical", float(lo[bad[0]]))
    pt = _PT @ stack @ _PT
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * omega @ pt)), axis=1)
    # same pairing as symplectic_eigenvalues, so a one-sample series matches the scalar bit for bit
    nu = 0.5 * (moduli[:, 0] + moduli[:, 1])
    raw = -np.log(2.0 * nu)
    return np.where(raw > NEGATIVITY_CLAMP, raw, 0.0)


def pair_indices(layout: ModeLayout, first: str, second: str) -> list[int]:
    """Quadrature indices of two modes, in layout order (as :func:`reduce` keeps them)."""
    positions = sorted((layout.position(first), layout.position(second)))
    if positions[0] == positions[1]:
        raise InputError(f"pair needs two distinct modes, got {first!r} twice")
    return [q for k in positions for q in (2 * k, 2 * k + 1)]
