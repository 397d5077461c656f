#!/usr/bin/env python3
"""Benchmark the numba kernel against the pure-numpy integration path.

Both backends run the same default working point (driven charger, thermal
machine on) over an identical grid; the script reports steps/s, the
speedup, and the worst entry-wise disagreement between the two final
trajectories.
"""

import argparse
import time

import numpy as np

from qatm_battery.dynamics import integrate
from qatm_battery.model import (
    KET_EXCITED,
    KET_GROUND,
    ModelParams,
    composite_initial_state,
)


def run(backend: str, p, rho0, dt, t_max):
    start = time.perf_counter()
    traj = integrate(p, rho0, dt=dt, t_max=t_max, backend=backend)
    elapsed = time.perf_counter() - start
    return traj, elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-max", type=float, default=20.0,
                    help="simulated time per run (default 20)")
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    p = ModelParams(f=0.8)
    rho0 = composite_initial_state(p, KET_EXCITED, KET_GROUND)
    n_steps = int(round(args.t_max / args.dt))

    print(f"integrating {n_steps} RK4 steps of the 16-dim master equation, "
          f"{args.repeats} repeats per backend")

    print("warming up the numba kernel (compile or cache load)...")
    run("numba", p, rho0, args.dt, 0.1)

    timings = {}
    trajs = {}
    for backend in ("numba", "numpy"):
        best = np.inf
        for _ in range(args.repeats):
            traj, elapsed = run(backend, p, rho0, args.dt, args.t_max)
            best = min(best, elapsed)
        timings[backend] = best
        trajs[backend] = traj
        print(f"{backend:>6}: {best:8.3f} s  ({n_steps / best:10.0f} steps/s)")

    diff = float(np.max(np.abs(trajs["numba"].states - trajs["numpy"].states)))
    print(f"speedup: {timings['numpy'] / timings['numba']:.1f}x")
    print(f"max final-state disagreement: {diff:.3e}")


if __name__ == "__main__":
    main()
