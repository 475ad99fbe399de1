"""Brute-force Lindblad integration on a truncated Fock space.

Used only to cross-check the moment equations on small instances; the
matrices are dense and the integrator is a plain adaptive Runge-Kutta.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import (
    ControlSchedule,
    CouplingKind,
    CovarianceState,
    SystemSpec,
    _check_controls,
)


class StiffnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class FockConfig:
    cutoffs: tuple[int, ...]
    max_dim: int = 4096

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        if any(c < 2 for c in self.cutoffs):
            raise ValueError(f"every cutoff must be >= 2, got {self.cutoffs}")
        if self.dim > self.max_dim:
            mib = 16 * self.dim**2 / 2**20
            raise ValueError(
                f"Fock dimension {self.dim} exceeds max_dim={self.max_dim} "
                f"(one dense density matrix needs ~{mib:.0f} MiB, the Lindbladian far more)"
            )

    @property
    def dim(self) -> int:
        return int(np.prod(self.cutoffs))


def destroy(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def _embed(op: np.ndarray, k: int, cutoffs) -> np.ndarray:
    mats = [op if i == k else np.eye(c) for i, c in enumerate(cutoffs)]
    return reduce(np.kron, mats)


def ladder_operators(fock: FockConfig) -> list[np.ndarray]:
    return [_embed(destroy(c), k, fock.cutoffs) for k, c in enumerate(fock.cutoffs)]


def _check_fock(system: SystemSpec, fock: FockConfig):
    if len(fock.cutoffs) != system.n_modes:
        raise ValueError(f"{len(fock.cutoffs)} cutoffs for a {system.n_modes}-mode system")


def build_hamiltonian(system: SystemSpec, controls, fock: FockConfig) -> np.ndarray:
    _check_fock(system, fock)
    controls = _check_controls(system, controls)
    c = ladder_operators(fock)
    H = sum(m.frequency * (op.conj().T @ op) for m, op in zip(system.modes, c))
    for cp in system.couplings:
        g = complex(cp.value) if cp.slot is None else controls[cp.slot]
        i, j = cp.modes
        ci, cj = c[i], c[j]
        if cp.kind is CouplingKind.LINEARIZED_COMPLEX:
            H = H + (g * ci + np.conj(g) * ci.conj().T) @ (cj + cj.conj().T)
        elif cp.kind is CouplingKind.POSITION_POSITION:
            H = H + g.real * (ci + ci.conj().T) @ (cj + cj.conj().T)
        elif cp.kind is CouplingKind.BEAM_SPLITTER_RWA:
            H = H + g.real * (ci @ cj.conj().T + ci.conj().T @ cj)
        else:  # pragma: no cover
            raise AssertionError(cp.kind)
    return np.asarray(H, dtype=complex)


def collapse_operators(system: SystemSpec, fock: FockConfig) -> list[tuple[float, np.ndarray]]:
    """(rate, operator) pairs for the thermal damping of every mode."""
    ops = []
    for m, c in zip(system.modes, ladder_operators(fock)):
        if m.damping > 0:
            ops.append((m.damping * (m.bath_occupancy + 1), c))
            if m.bath_occupancy > 0:
                ops.append((m.damping * m.bath_occupancy, c.conj().T))
    return ops


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, system: SystemSpec, fock: FockConfig) -> np.ndarray:
    """-i[H, rho] + sum_k g_k (c rho c^dag - {c^dag c, rho}/2)."""
    out = -1j * (H @ rho - rho @ H)
    for g, c in collapse_operators(system, fock):
        cd = c.conj().T
        cdc = cd @ c
        out += g * (c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))
    return out


@dataclass
class QmeTrajectory:
    times: np.ndarray
    rhos: np.ndarray
    trace_drift: float
    top_population: float

    @property
    def reliable(self) -> bool:
        return self.top_population < 1e-4


def _top_level_population(rho: np.ndarray, fock: FockConfig) -> float:
    p = np.real(np.diag(rho)).reshape(fock.cutoffs)
    worst = 0.0
    for k in range(len(fock.cutoffs)):
        worst = max(worst, float(np.take(p, -1, axis=k).sum()))
    return worst


def evolve_qme(
    rho0: np.ndarray,
    system: SystemSpec,
    schedule: ControlSchedule,
    fock: FockConfig,
    t_end: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> QmeTrajectory:
    """Integrate the master equation through a piecewise-constant schedule.

    The trace is not renormalized; its drift is returned as a diagnostic.
    States are sampled at every schedule boundary up to ``t_end``.
    """
    _check_fock(system, fock)
    t_end = schedule.duration if t_end is None else t_end
    if t_end > schedule.duration * (1 + 1e-12):
        raise ValueError(f"schedule covers {schedule.duration}, asked for {t_end}")
    n_steps = int(np.ceil(t_end / schedule.dt - 1e-9))
    d = fock.dim
    rates = collapse_operators(system, fock)
    jumps = [(g, c, c.conj().T) for g, c in rates]
    damp = sum((g * (c.conj().T @ c) for g, c in rates), np.zeros((d, d), complex))
    rho = np.array(rho0, dtype=complex)
    times, rhos = [0.0], [rho.copy()]
    top = _top_level_population(rho, fock)
    for k in range(n_steps):
        t0, t1 = k * schedule.dt, min((k + 1) * schedule.dt, t_end)
        H = build_hamiltonian(system, schedule.values[k], fock)
        heff = H - 0.5j * damp
        heff_dag = heff.conj().T

        def rhs(_t, y, heff=heff, heff_dag=heff_dag):
            r = y.reshape(d, d)
            out = -1j * (heff @ r - r @ heff_dag)
            for g, c, cd in jumps:
                out += g * (c @ r @ cd)
            return out.ravel()

        sol = solve_ivp(rhs, (t0, t1), rho.ravel(), method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise StiffnessError(
                f"master-equation integration failed on [{t0}, {t1}]: {sol.message}; "
                "use smaller cutoffs/frequencies or the moment method"
            )
        rho = sol.y[:, -1].reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        times.append(t1)
        rhos.append(rho.copy())
        top = max(top, _top_level_population(rho, fock))
    drift = max(abs(np.trace(r).real - 1.0) for r in rhos)
    return QmeTrajectory(np.array(times), np.array(rhos), float(drift), top)


def thermal_density(system: SystemSpec, fock: FockConfig, normalize: bool = True) -> np.ndarray:
    """Product of truncated thermal states at each mode's bath occupancy."""
    _check_fock(system, fock)
    blocks = []
    for m, n in zip(system.modes, fock.cutoffs):
        nbar = m.bath_occupancy
        k = np.arange(n)
        p = (nbar / (nbar + 1)) ** k / (nbar + 1) if nbar > 0 else (k == 0).astype(float)
        blocks.append(np.diag(p))
    rho = reduce(np.kron, blocks).astype(complex)
    return rho / np.trace(rho).real if normalize else rho


def moments_from_density(rho: np.ndarray, system: SystemSpec, fock: FockConfig):
    """Quadrature covariance, per-mode occupancies and first moments of ``rho``.

    Built from normal-ordered expectations ``<c_i c_j>`` and ``<c_i^dag c_j>``,
    which are exact on the truncated space (``c c^dag`` is not).
    Returns ``(CovarianceState, occupancies, first_moments)``.
    """
    _check_fock(system, fock)
    c = ladder_operators(fock)
    n = len(c)
    rt = rho.T  # Tr(rho X) = sum(rho.T * X)

    def ev(op):
        return complex(np.sum(rt * op))

    S = np.array([[ev(c[i] @ c[j]) for j in range(n)] for i in range(n)])
    N = np.array([[ev(c[i].conj().T @ c[j]) for j in range(n)] for i in range(n)])
    a = np.array([ev(op) for op in c])
    sigma = np.empty((2 * n, 2 * n))
    sigma[0::2, 0::2] = S.real + N.real
    sigma[1::2, 1::2] = -S.real + N.real
    sigma[0::2, 1::2] = S.imag + N.imag
    sigma[1::2, 0::2] = S.imag - N.imag
    sigma[np.diag_indices(2 * n)] += 0.5
    means = np.empty(2 * n)
    means[0::2] = np.sqrt(2) * a.real
    means[1::2] = np.sqrt(2) * a.imag
    sigma -= np.outer(means, means)
    return CovarianceState(0.5 * (sigma + sigma.T)), N.diagonal().real.copy(), means


@dataclass
class CrossCheck:
    """Occupancies from both methods at every schedule boundary."""

    times: np.ndarray
    n_moments: np.ndarray
    n_oracle: np.ndarray
    reliable: bool
    trace_drift: float

    @property
    def error(self) -> float:
        """Worst occupancy deviation relative to the largest total oracle occupancy."""
        scale = max(float(self.n_oracle.sum(axis=1).max()), 1e-12)
        return float(np.abs(self.n_moments - self.n_oracle).max() / scale)


def cross_check(system: SystemSpec, schedule: ControlSchedule, fock: FockConfig,
                rho0: np.ndarray | None = None, **ivp_kwargs) -> CrossCheck:
    """Evolve the same instance with the master equation and the moment method.

    The moment evolution starts from the oracle's own initial covariance, so
    truncation of the initial state does not count as disagreement.
    """
    from .dynamics import evolve

    rho0 = thermal_density(system, fock) if rho0 is None else rho0
    traj = evolve_qme(rho0, system, schedule, fock, **ivp_kwargs)
    n_oracle = np.array([moments_from_density(r, system, fock)[1] for r in traj.rhos])
    sigma0 = moments_from_density(rho0, system, fock)[0]
    n_mom = evolve(system, schedule, sigma0).occupancies()
    return CrossCheck(traj.times, n_mom, n_oracle, traj.reliable, traj.trace_drift)


def trajectory_trace(traj: QmeTrajectory, system: SystemSpec, schedule: ControlSchedule, fock: FockConfig,
                     n_thermal: float | None = None):
    """Oracle trajectory as an :class:`~magnocool.trace.EpisodeTrace` (zero rewards)."""
    from .trace import EpisodeTrace

    occ = np.array([moments_from_density(r, system, fock)[1] for r in traj.rhos[1:]])
    n_t = system.modes[system.target_mode].bath_occupancy if n_thermal is None else n_thermal
    k = len(occ)
    return EpisodeTrace(
        times=traj.times[1:], controls=schedule.values[:k], occupancies=occ, rewards=np.zeros(k),
        mode_labels=tuple(m.label for m in system.modes), target_mode=system.target_mode,
        n_thermal=n_t if n_t > 0 else 1.0,
        complex_slots=tuple(system.slot_is_complex(s) for s in range(system.n_control_slots)),
    )
