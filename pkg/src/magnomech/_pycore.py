"""Pure-numpy kernels. Reference for the compiled ``_core`` module.

Both backends implement the same algorithms step for step, so results
agree to rounding; see ``tests/test_kernels.py``.
"""

import math

import numpy as np

# Pade(6, 6) coefficients c_k = (12-k)! 6! / (12! k! (6-k)!)
PADE6 = tuple(
    math.factorial(12 - k) * math.factorial(6) / (math.factorial(12) * math.factorial(k) * math.factorial(6 - k))
    for k in range(7)
)
# scaled 1-norm bound for the Pade step
THETA = 0.5
MAX_SQUARINGS = 60

N_MEAN_STATE = 10
N_MEAN_COEFFS = 18


def squarings(norm1: float) -> int:
    if not math.isfinite(norm1):
        return -1
    if norm1 <= THETA:
        return 0
    return int(math.ceil(math.log2(norm1 / THETA)))


def expm_pade(a: np.ndarray) -> np.ndarray:
    """exp(a) by scaling and squaring with a diagonal Pade(6, 6) approximant."""
    a = np.asarray(a, dtype=float)
    s = squarings(float(np.max(np.sum(np.abs(a), axis=0))) if a.size else 0.0)
    if s < 0 or s > MAX_SQUARINGS:
        raise OverflowError("matrix norm too large for exponentiation")
    x = a / 2.0**s
    n = a.shape[0]
    ident = np.eye(n)
    num = PADE6[0] * ident
    den = PADE6[0] * ident
    xk = ident
    for k in range(1, 7):
        xk = xk @ x
        num = num + PADE6[k] * xk
        den = den + (-1) ** k * PADE6[k] * xk
    r = np.linalg.solve(den, num)
    for _ in range(s):
        r = r @ r
    if not np.all(np.isfinite(r)):
        raise OverflowError("matrix exponential overflowed")
    return r


def propagate_midpoint(a_mid, d, v0, dt, stride):
    """Time-ordered covariance propagation with piecewise-constant drift.

    Step ``k`` uses the drift ``a_mid[k]`` (sampled at the step midpoint):
    ``V <- M V M^T + Q`` with ``H = exp(A dt/2)``, ``M = H H`` and the noise
    integral ``Q = int_0^dt exp(A s) D exp(A s)^T ds`` by Simpson's rule,
    ``Q = dt/6 (D + 4 H D H^T + M D M^T)``.
    Returns the ``len(a_mid) // stride + 1`` samples taken every ``stride`` steps.
    """
    a_mid = np.asarray(a_mid, dtype=float)
    n_steps = a_mid.shape[0]
    if n_steps % stride:
        raise ValueError("number of steps must be a multiple of the stride")
    v = np.array(v0, dtype=float)
    d = np.asarray(d, dtype=float)
    out = np.empty((n_steps // stride + 1,) + v.shape)
    out[0] = v
    for k in range(n_steps):
        h = expm_pade(a_mid[k] * (0.5 * dt))
        m = h @ h
        q = d + 4.0 * (h @ d @ h.T) + m @ d @ m.T
        v = m @ v @ m.T + (dt / 6.0) * q
        v = 0.5 * (v + v.T)
        if (k + 1) % stride == 0:
            out[(k + 1) // stride] = v
    return out


def mean_field_rhs(y, c):
    """Noise-free Langevin equations for (a, m1, m2, q1, p1, q2, p2).

    ``y`` is ``[Re a, Im a, Re m1, Im m1, Re m2, Im m2, q1, p1, q2, p2]``;
    ``c`` is ``[da, dm1, dm2, ka, km1, km2, g1, g2, G01, G02, wb1, wb2,
    gb1, gb2, Re O1, Im O1, Re O2, Im O2]`` (angular units).
    """
    ar, ai, m1r, m1i, m2r, m2i, q1, p1, q2, p2 = y
    da, dm1, dm2, ka, km1, km2, g1, g2, G01, G02, wb1, wb2, gb1, gb2, o1r, o1i, o2r, o2i = c
    out = np.empty(N_MEAN_STATE)
    out[0] = -ka * ar + da * ai + g1 * m1i + g2 * m2i
    out[1] = -da * ar - ka * ai - g1 * m1r - g2 * m2r
    out[2] = -km1 * m1r + dm1 * m1i + G01 * q1 * m1i + g1 * ai + o1r
    out[3] = -dm1 * m1r - km1 * m1i - G01 * q1 * m1r - g1 * ar + o1i
    out[4] = -km2 * m2r + dm2 * m2i + G02 * q2 * m2i + g2 * ai + o2r
    out[5] = -dm2 * m2r - km2 * m2i - G02 * q2 * m2r - g2 * ar + o2i
    out[6] = wb1 * p1
    out[7] = -wb1 * q1 - gb1 * p1 - G01 * (m1r * m1r + m1i * m1i)
    out[8] = wb2 * p2
    out[9] = -wb2 * q2 - gb2 * p2 - G02 * (m2r * m2r + m2i * m2i)
    return out


def rk4_mean_field(y0, c, h, n_steps):
    """Classical RK4 over ``n_steps`` of size ``h``; returns all ``n_steps + 1`` states."""
    y = np.array(y0, dtype=float)
    c = np.asarray(c, dtype=float)
    out = np.empty((n_steps + 1, N_MEAN_STATE))
    out[0] = y
    for k in range(n_steps):
        k1 = mean_field_rhs(y, c)
        k2 = mean_field_rhs(y + 0.5 * h * k1, c)
        k3 = mean_field_rhs(y + 0.5 * h * k2, c)
        k4 = mean_field_rhs(y + h * k3, c)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out
