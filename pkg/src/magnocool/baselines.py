"""Non-learning reference protocols: constant-coupling sideband cooling,
far-detuned Raman transfer limits, and counter-intuitive Gaussian pulses."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .dynamics import (
    EPS_N,
    PERIOD,
    SystemSpec,
    _propagator,
    build_generators,
    occupancies,
    propagate,
    thermal_covariance,
)
from .env import INVERSE_QUOTIENT_MINUS_MAGNON, RewardSpec
from .trace import EpisodeTrace

log = logging.getLogger(__name__)

#: Quotient above which a constant-coupling run is declared divergent.
DIVERGENCE_QUOTIENT = 1e8


class UnreachableTargetError(ValueError):
    pass


@dataclass
class SidebandEntry:
    G: float
    min_quotient: float
    time_to_min: float
    time_to_target: float | None
    time_to_settle: float | None
    diverged: bool = False
    times: np.ndarray = field(default=None, repr=False)
    quotients: np.ndarray = field(default=None, repr=False)

    def first_crossing(self, target: float) -> float | None:
        hit = np.flatnonzero(self.quotients <= target)
        return float(self.times[hit[0]]) if hit.size else None

    def settling_time(self, target: float) -> float | None:
        """Start of the final stretch that stays at or below ``target``."""
        if self.diverged:
            return None
        above = np.flatnonzero(self.quotients > target)
        if above.size == 0:
            return float(self.times[0])
        k = above[-1] + 1
        return float(self.times[k]) if k < len(self.times) else None


@dataclass
class SidebandSweepResult:
    """Entries sorted by G; all times are in phonon periods."""

    entries: list[SidebandEntry]
    target_quotient: float

    def table(self) -> list[dict]:
        return [
            {"G": e.G, "min_quotient": e.min_quotient, "time_to_min": e.time_to_min,
             "time_to_target": e.time_to_target, "time_to_settle": e.time_to_settle,
             "diverged": e.diverged}
            for e in self.entries
        ]


def sideband_grid(g_lo: float = 0.02, g_hi: float = 0.3, per_decade: int = 15) -> np.ndarray:
    n = int(round(per_decade * np.log10(g_hi / g_lo))) + 1
    return np.logspace(np.log10(g_lo), np.log10(g_hi), n)


def sideband_sweep(
    system: SystemSpec,
    G_values,
    horizon_periods: float = 200.0,
    target_quotient: float = 2e-4,
    dt_periods: float = 0.1,
) -> SidebandSweepResult:
    """Constant-coupling cooling from the thermal state for each G.

    ``system`` must have a single coupling control slot (e.g.
    :func:`~magnocool.dynamics.bipartite_system` with ``coupling=None``).
    """
    if system.n_control_slots != 1:
        raise ValueError("sideband sweep drives exactly one coupling slot")
    target = system.target_mode
    n_thermal = system.modes[target].bath_occupancy
    dt = dt_periods * PERIOD
    n_steps = int(round(horizon_periods / dt_periods))
    entries = []
    for G in sorted(float(g) for g in G_values):
        gen = build_generators(system, [G])
        phi, noise = _propagator(gen.drift, gen.diffusion, dt)
        sigma = thermal_covariance(system).sigma
        q = np.empty(n_steps)
        diverged = False
        for k in range(n_steps):
            sigma = phi @ sigma @ phi.T + noise
            sigma = 0.5 * (sigma + sigma.T)
            n_b = 0.5 * (sigma[2 * target, 2 * target] + sigma[2 * target + 1, 2 * target + 1] - 1)
            q[k] = max(n_b, EPS_N) / n_thermal
            if not np.isfinite(q[k]) or q[k] > DIVERGENCE_QUOTIENT:
                q, diverged = q[: k + 1], True
                q[-1] = np.inf if not np.isfinite(q[-1]) else q[-1]
                break
        times = dt_periods * np.arange(1, len(q) + 1)
        e = SidebandEntry(G, float(q.min()), float(times[np.argmin(q)]), None, None, diverged, times, q)
        e.time_to_target = e.first_crossing(target_quotient)
        e.time_to_settle = e.settling_time(target_quotient)
        entries.append(e)
    return SidebandSweepResult(entries, target_quotient)


def sideband_time_limit(result: SidebandSweepResult, target_quotient: float | None = None,
                        criterion: str = "settle") -> float:
    """Shortest time (periods) any constant G needs to reach the target.

    ``criterion="settle"`` counts the time after which the quotient stays
    below target (steady-state cooling); ``"first"`` uses the first crossing.
    """
    target = result.target_quotient if target_quotient is None else target_quotient
    if criterion == "settle":
        times = [e.settling_time(target) for e in result.entries]
    elif criterion == "first":
        times = [e.first_crossing(target) for e in result.entries]
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    times = [t for t in times if t is not None]
    if not times:
        best = min(e.min_quotient for e in result.entries)
        raise UnreachableTargetError(
            f"no coupling reaches quotient {target:g}; best achieved {best:.3e}"
        )
    return min(times)


def raman_time_limit(omega_m: float, omega_s: float, omega_p: float) -> float:
    """Ideal far-detuned Raman swap time, pi omega_m / (2 Omega_S Omega_P)."""
    if omega_s <= 0 or omega_p <= 0:
        raise ValueError("Raman couplings must be > 0")
    if omega_m < 10 * np.hypot(omega_s, omega_p):
        warnings.warn("omega_m is not much larger than the couplings; large-detuning limit is doubtful",
                      stacklevel=2)
    return np.pi * omega_m / (2 * omega_s * omega_p)


def effective_two_mode(omega_m: float, omega_s: float, omega_p: float) -> tuple[float, float]:
    """Effective detuning and coupling of the photon-phonon pair after eliminating the magnon."""
    if not omega_m > 0:
        raise ValueError("omega_m must be > 0")
    return (omega_p**2 - omega_s**2) / (2 * omega_m), omega_s * omega_p / omega_m


@dataclass(frozen=True)
class GaussianPulsePair:
    """Gaussian Omega_S(t) (photon-magnon) and Omega_P(t) (magnon-phonon).

    Counter-intuitive ordering means the Stokes pulse comes first:
    ``center_s < center_p``.
    """

    peak_s: float
    peak_p: float
    center_s: float
    center_p: float
    width: float
    total_time: float

    def __post_init__(self):
        if self.peak_s < 0 or self.peak_p < 0:
            raise ValueError("pulse peaks must be >= 0")
        if not self.width > 0 or not self.total_time > 0:
            raise ValueError("width and total_time must be > 0")

    @property
    def counter_intuitive(self) -> bool:
        return self.center_s < self.center_p

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = self.peak_s * np.exp(-0.5 * ((t - self.center_s) / self.width) ** 2)
        p = self.peak_p * np.exp(-0.5 * ((t - self.center_p) / self.width) ** 2)
        return np.stack([s, p], axis=-1)

    def sample(self, dt: float) -> np.ndarray:
        """Controls on the piecewise-constant grid (midpoint values)."""
        n = int(round(self.total_time / dt))
        return self((np.arange(n) + 0.5) * dt)


def _run_controls(system: SystemSpec, controls: np.ndarray, dt: float):
    state = thermal_covariance(system)
    occ = np.empty((len(controls), system.n_modes))
    times = np.empty(len(controls))
    for k, c in enumerate(controls):
        state = propagate(state, build_generators(system, c), dt)
        occ[k] = occupancies(state)
        times[k] = state.time
    return times, occ


def stirap_run(system: SystemSpec, pulses: GaussianPulsePair, dt_periods: float = 0.1,
               reward: RewardSpec | None = None) -> EpisodeTrace:
    """Open-loop evolution of a tripartite system under a Gaussian pulse pair."""
    if system.n_control_slots != 2:
        raise ValueError("STIRAP run needs the two-slot (Omega_S, Omega_P) system")
    dt = dt_periods * PERIOD
    controls = pulses.sample(dt)
    times, occ = _run_controls(system, controls, dt)
    target = system.target_mode
    n_thermal = system.modes[target].bath_occupancy
    if reward is None:
        reward = RewardSpec(INVERSE_QUOTIENT_MINUS_MAGNON, n_thermal, 10.0)
    magnon = system.mode_index("magnon")
    rewards = np.array([reward(o, target, magnon) for o in occ])
    return EpisodeTrace(
        times=times, controls=controls, occupancies=occ, rewards=rewards,
        mode_labels=tuple(m.label for m in system.modes), target_mode=target,
        n_thermal=reward.n_thermal, complex_slots=(False, False),
    )


@dataclass
class StirapOptimum:
    pulses: GaussianPulsePair
    final_quotient: float
    min_quotient: float
    converged: bool
    n_evaluations: int
    restarts: list[tuple[float, bool]] = field(default_factory=list, repr=False)

    @property
    def heating(self) -> bool:
        return self.final_quotient >= 1.0


def _decode(x, omega_max, total_time, optimize_peaks):
    center_s = total_time * x[0]
    delay = total_time * abs(x[1])
    width = total_time * (0.01 + abs(x[2]))
    if optimize_peaks:
        peak_s, peak_p = (omega_max * min(abs(v), 1.0) for v in x[3:5])
    else:
        peak_s = peak_p = omega_max
    # strictly counter-intuitive
    delay = max(delay, 1e-3 * total_time)
    return GaussianPulsePair(peak_s, peak_p, center_s, center_s + delay, width, total_time)


def stirap_horizon_steps(system: SystemSpec, omega_max: float, dt_periods: float = 0.1,
                         factor: float = 2.0) -> int:
    omega_m = system.modes[system.mode_index("magnon")].frequency
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t_lim = raman_time_limit(omega_m, omega_max, omega_max)
    return max(int(np.ceil(factor * t_lim / (dt_periods * PERIOD))), 10)


def stirap_optimize(
    system: SystemSpec,
    omega_max: float,
    horizon_steps: int | None = None,
    dt_periods: float = 0.1,
    restarts: int = 20,
    seed: int = 0,
    optimize_peaks: bool = False,
    maxiter: int = 300,
) -> StirapOptimum:
    """Nelder-Mead over pulse timing (and optionally peaks) with random restarts.

    The objective is log10 of the final phonon quotient. By default both
    peaks are pinned at ``omega_max`` and only the Stokes center, the
    Stokes-to-pump delay and the common width are searched; with
    ``optimize_peaks`` the two peaks are free in [0, omega_max].

    The default horizon is twice the ideal Raman swap time at
    ``omega_max``, rounded up to whole control steps.
    """
    dt = dt_periods * PERIOD
    if horizon_steps is None:
        horizon_steps = stirap_horizon_steps(system, omega_max, dt_periods)
    total_time = horizon_steps * dt
    target = system.target_mode
    n_thermal = system.modes[target].bath_occupancy
    rng = np.random.default_rng(seed)
    n_evals = 0

    def objective(x):
        nonlocal n_evals
        n_evals += 1
        pulses = _decode(x, omega_max, total_time, optimize_peaks)
        try:
            _, occ = _run_controls(system, pulses.sample(dt), dt)
        except ArithmeticError:
            return 20.0
        q = max(occ[-1, target], EPS_N) / n_thermal
        return float(np.log10(q)) if np.isfinite(q) else 20.0

    best_x, best_f, best_conv = None, np.inf, False
    summary = []
    for _ in range(restarts):
        x0 = [rng.uniform(0.15, 0.5), rng.uniform(0.05, 0.3), rng.uniform(0.04, 0.2)]
        if optimize_peaks:
            x0 += list(rng.uniform(0.5, 1.0, size=2))
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-4, "fatol": 1e-4})
        summary.append((float(res.fun), bool(res.success)))
        if res.fun < best_f:
            best_x, best_f, best_conv = res.x, res.fun, bool(res.success)
    pulses = _decode(best_x, omega_max, total_time, optimize_peaks)
    trace = stirap_run(system, pulses, dt_periods)
    if not best_conv:
        log.warning("STIRAP optimizer did not converge at omega_max=%g; returning best found", omega_max)
    return StirapOptimum(pulses, float(trace.target_quotient[-1]), trace.min_quotient, best_conv, n_evals, summary)
