"""Time the numba and numpy RK4 kernels on bench-sized problems.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from qtopo import _kernels
from qtopo.dynamics import _prepare, bench_initial_state, build_duffing, pulse_library
from qtopo.geomsweep import BASELINE, synthetic_capacitance
from qtopo.hamiltonian import hamiltonian_from_network


def problem(regime):
    h = hamiltonian_from_network(synthetic_capacitance(BASELINE))
    model = build_duffing(h, 3)
    pulse = pulse_library(regime)[0]
    prep = _prepare(model, pulse)
    dt = 1.0 / (50 * prep.max_frequency)
    steps = int(pulse.duration / dt) + 1
    dt = pulse.duration / steps
    t = np.arange(2 * steps + 1) * 0.5 * dt
    samples = pulse.amplitude * pulse.envelope(t) * np.cos(2 * np.pi * prep.carrier * t)
    phi0 = prep.vectors.T @ bench_initial_state(model, pulse)
    return (2 * np.pi * prep.energies, prep.drive_eig, phi0, samples, dt), steps


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--regimes", nargs="+", default=["short", "overdrive"])
    args = parser.parse_args()
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    if "numba" in backends:
        _kernels.propagate(*problem("short")[0], backend="numba")  # compile outside the timing
    print(f"{'regime':<10} {'steps':>8} " + " ".join(f"{b + ' [s]':>12}" for b in backends) + "   speedup")
    for regime in args.regimes:
        prob, steps = problem(regime)
        best = {}
        for b in backends:
            times = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                _kernels.propagate(*prob, backend=b)
                times.append(time.perf_counter() - t0)
            best[b] = min(times)
        speed = f"{best['numpy'] / best['numba']:8.1f}x" if "numba" in best else "       -"
        print(f"{regime:<10} {steps:>8} " + " ".join(f"{best[b]:>12.4f}" for b in backends) + "  " + speed)


if __name__ == "__main__":
    main()
