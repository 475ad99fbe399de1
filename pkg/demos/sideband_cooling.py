"""Constant-coupling sideband cooling of a thermal phonon.

Checks the moment method against the truncated master equation on a small
instance, then sweeps the magnon-phonon coupling G and reports the shortest
time any constant G needs to bring the phonon quotient below target.

Run: python demos/sideband_cooling.py
"""
import numpy as np

from magnocool.baselines import sideband_grid, sideband_sweep, sideband_time_limit
from magnocool.dynamics import PERIOD, ControlSchedule, bipartite_system
from magnocool.oracle import FockConfig, cross_check

# low-temperature instance where an 8-level cutoff is faithful
small = bipartite_system(n_thermal=0.05, n_magnon=0.05)
sched = ControlSchedule(0.1 * PERIOD, np.full((40, 1), 0.2 + 0.1j))
cc = cross_check(small, sched, FockConfig((8, 8)))
print(f"moment method vs master equation: error {cc.error:.2e}, oracle reliable={cc.reliable}")

system = bipartite_system(n_thermal=100.0)
result = sideband_sweep(system, sideband_grid(0.02, 0.3, 5), horizon_periods=100.0, target_quotient=2e-4)
print(f"\n{'G':>8} {'min quotient':>14} {'settle (periods)':>18}")
for e in result.entries:
    settle = "never" if e.time_to_settle is None else f"{e.time_to_settle:.1f}"
    print(f"{e.G:8.4f} {e.min_quotient:14.3e} {settle:>18}")

try:
    tau = sideband_time_limit(result, criterion="settle")
    print(f"\ntau_SB (settle below 2e-4) = {tau:.1f} periods")
except ValueError as exc:
    print(f"\ntarget not reached on this coarse grid: {exc}")
