"""Backend selection for the hot loops.

The compiled ``_core`` extension is used when it was built; otherwise the
numpy implementation in ``_pycore``. Set ``MAGNOMECH_BACKEND=python`` to
force the fallback (the benchmark and the backend-agreement tests do).
"""

import os

from . import _pycore

if os.environ.get("MAGNOMECH_BACKEND", "").lower() == "python":
    _impl = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pycore
        BACKEND = "python"
    else:
        BACKEND = "cython"

expm_pade = _impl.expm_pade
propagate_midpoint = _impl.propagate_midpoint
rk4_mean_field = _impl.rk4_mean_field
mean_field_rhs = _impl.mean_field_rhs


def available_backends():
    """Mapping of backend name to kernel module, for benchmarks and tests."""
    out = {"python": _pycore}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        out["cython"] = _core
    return out
