"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per kernel and backend, the speedup, and the
largest relative deviation between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from magnomech.kernels import available_backends
from magnomech.model import diffusion_matrix, drift_matrix, effective_couplings, steady_state_means
from magnomech.config import build_scenario
from magnomech.presets import base_document


def _workload():
    scenario, _, _ = build_scenario(base_document())
    params = scenario.params
    drive = scenario.drive1_spec()
    means = steady_state_means(params, drive)
    a = drift_matrix(params, effective_couplings(params, drive.omega0, means))
    d = diffusion_matrix(params)
    rng = np.random.default_rng(7)
    stack = a[None] * (1 + 1e-3 * rng.standard_normal((2000, 1, 1)))
    v0 = 0.5 * np.eye(10)
    dt = 1e-10
    y0 = means.to_vector()
    coeffs = np.zeros(18)
    coeffs[:14] = [1e8, 2e8, 7e7, 6e6, 6e6, 6e6, 3e7, 6e6, 63, 63, 1e8, 7.5e7, 600, 600]
    coeffs[16] = 3e12
    return {
        "expm_pade (x200)": lambda k: [k.expm_pade(a * dt * 40) for _ in range(200)],
        "propagate_midpoint (2000 steps)": lambda k: k.propagate_midpoint(stack, d, v0, dt, 1),
        "rk4_mean_field (20000 steps)": lambda k: k.rk4_mean_field(y0, coeffs, 5e-11, 20000),
    }


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy fallback is available")
    print(f"{'kernel':34s} " + " ".join(f"{name:>10s}" for name in backends) + "    speedup  max rel dev")
    for label, work in _workload().items():
        times, outs = {}, {}
        for name, mod in backends.items():
            times[name], outs[name] = _best(lambda: work(mod), args.repeat)
        row = f"{label:34s} " + " ".join(f"{times[n] * 1e3:8.2f}ms" for n in backends)
        if len(backends) > 1:
            ref = np.asarray(outs["python"])
            dev = np.max(np.abs(np.asarray(outs["cython"]) - ref)) / np.max(np.abs(ref))
            row += f"  {times['python'] / times['cython']:8.1f}x  {dev:10.2e}"
        print(row)


if __name__ == "__main__":
    main()
