"""Second-order moment dynamics of driven-dissipative coupled bosonic modes.

The state is the real quadrature covariance matrix
``sigma_ij = <{r_i, r_j}>/2`` with ``r = (x_1, p_1, ..., x_N, p_N)``,
``x = (c + c^dag)/sqrt(2)`` and ``p = -i(c - c^dag)/sqrt(2)``, so the vacuum
is ``I/2``. For a quadratic Hamiltonian ``H = r^T M r / 2`` plus thermal
Lindblad damping of each mode the covariance obeys

    d sigma/dt = A sigma + sigma A^T + D,

with ``A = Omega M - diag(kappa/2)`` and ``D = diag(kappa (nbar + 1/2))``.
All frequencies and rates are in units of the phonon frequency omega_b,
times in units of 1/omega_b.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

#: Occupancy floor used before dividing by an occupancy (quotient, reward).
EPS_N = 1e-12

#: One phonon period in units of 1/omega_b.
PERIOD = 2.0 * np.pi


class PropagationError(ArithmeticError):
    """Matrix exponential produced non-finite entries."""


class NoSteadyStateError(ValueError):
    """Drift matrix is not Hurwitz, so no stationary covariance exists."""


@dataclass(frozen=True)
class ModeSpec:
    label: str
    frequency: float
    damping: float = 0.0
    bath_occupancy: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"mode {self.label!r}: frequency must be > 0, got {self.frequency}")
        if not self.damping >= 0:
            raise ValueError(f"mode {self.label!r}: damping must be >= 0, got {self.damping}")
        if not self.bath_occupancy >= 0:
            raise ValueError(f"mode {self.label!r}: bath occupancy must be >= 0")


class CouplingKind(str, enum.Enum):
    #: (G c1 + G* c1^dag)(c2 + c2^dag), complex G
    LINEARIZED_COMPLEX = "linearized_complex"
    #: Omega (c1 + c1^dag)(c2 + c2^dag), real Omega
    POSITION_POSITION = "position_position"
    #: G (c1 c2^dag + c1^dag c2), real G
    BEAM_SPLITTER_RWA = "beam_splitter_rwa"


@dataclass(frozen=True)
class CouplingSpec:
    """Quadratic interaction between two modes.

    Exactly one of ``value`` (a fixed amplitude) or ``slot`` (index into the
    control vector) must be given.
    """

    kind: CouplingKind
    modes: tuple[int, int]
    value: complex | None = None
    slot: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))
        object.__setattr__(self, "modes", tuple(int(i) for i in self.modes))
        if len(self.modes) != 2 or self.modes[0] == self.modes[1]:
            raise ValueError(f"coupling needs two distinct modes, got {self.modes}")
        if (self.value is None) == (self.slot is None):
            raise ValueError("coupling needs exactly one of value= or slot=")
        if self.value is not None and self.kind is not CouplingKind.LINEARIZED_COMPLEX:
            if np.imag(self.value) != 0:
                raise ValueError(f"{self.kind.value} coupling amplitude must be real")

    @property
    def is_complex(self) -> bool:
        return self.kind is CouplingKind.LINEARIZED_COMPLEX


@dataclass(frozen=True)
class SystemSpec:
    modes: tuple[ModeSpec, ...]
    couplings: tuple[CouplingSpec, ...] = ()
    n_control_slots: int = 0
    target_mode: int = 0
    name: str = "system"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        n = len(self.modes)
        if n == 0:
            raise ValueError("system needs at least one mode")
        if not 0 <= self.target_mode < n:
            raise ValueError(f"target_mode {self.target_mode} out of range for {n} modes")
        used = set()
        for c in self.couplings:
            if not all(0 <= i < n for i in c.modes):
                raise ValueError(f"coupling modes {c.modes} out of range for {n} modes")
            if c.slot is not None:
                if not 0 <= c.slot < self.n_control_slots:
                    raise ValueError(f"control slot {c.slot} out of range [0, {self.n_control_slots})")
                used.add(c.slot)
        missing = set(range(self.n_control_slots)) - used
        if missing:
            raise ValueError(f"control slots {sorted(missing)} are not referenced by any coupling")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def dim(self) -> int:
        return 2 * len(self.modes)

    def slot_is_complex(self, slot: int) -> bool:
        return any(c.is_complex for c in self.couplings if c.slot == slot)

    def mode_index(self, label: str) -> int:
        for i, m in enumerate(self.modes):
            if m.label == label:
                return i
        raise KeyError(label)

    def replace_modes(self, **overrides: ModeSpec) -> "SystemSpec":
        """Copy with some modes (by label) swapped out."""
        modes = tuple(overrides.get(m.label, m) for m in self.modes)
        return SystemSpec(modes, self.couplings, self.n_control_slots, self.target_mode, self.name)


@dataclass(frozen=True)
class CovarianceState:
    sigma: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] % 2:
            raise ValueError(f"sigma must be a square matrix of even size, got {sigma.shape}")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_modes(self) -> int:
        return self.sigma.shape[0] // 2


@dataclass(frozen=True)
class GeneratorPair:
    drift: np.ndarray
    diffusion: np.ndarray


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant controls: ``values[k]`` is held on ``[k dt, (k+1) dt)``."""

    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        values = np.array(self.values)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("schedule values must be (n_steps, n_slots)")
        if not np.all(np.isfinite(values)):
            raise ValueError("schedule contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def boundaries(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_controls(system: SystemSpec, controls) -> np.ndarray:
    controls = np.atleast_1d(np.asarray(controls, dtype=complex))
    if controls.shape != (system.n_control_slots,):
        raise ValueError(f"expected {system.n_control_slots} control values, got shape {controls.shape}")
    if not np.all(np.isfinite(controls)):
        raise ValueError(f"non-finite control values: {controls}")
    return controls


def hamiltonian_matrix(system: SystemSpec, controls=()) -> np.ndarray:
    """Symmetric ``M`` with ``H = r^T M r / 2`` (up to a constant)."""
    controls = _check_controls(system, controls)
    n = system.n_modes
    M = np.zeros((2 * n, 2 * n))
    for c in system.couplings:
        g = complex(c.value) if c.slot is None else controls[c.slot]
        i, j = c.modes
        xi, pi, xj, pj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
        if c.kind is CouplingKind.LINEARIZED_COMPLEX:
            # (G c_i + G* c_i^dag)(c_j + c_j^dag) = 2 (Re G x_i - Im G p_i) x_j
            M[xi, xj] += 2 * g.real
            M[pi, xj] += -2 * g.imag
        else:
            if g.imag != 0:
                raise ValueError(f"{c.kind.value} coupling requires a real amplitude, got {g}")
            if c.kind is CouplingKind.POSITION_POSITION:
                M[xi, xj] += 2 * g.real
            elif c.kind is CouplingKind.BEAM_SPLITTER_RWA:
                M[xi, xj] += g.real
                M[pi, pj] += g.real
            else:  # pragma: no cover - enum is closed
                raise AssertionError(f"unknown coupling kind {c.kind}")
    freqs = np.repeat([m.frequency for m in system.modes], 2)
    return np.diag(freqs) + M + M.T


def build_generators(system: SystemSpec, controls=()) -> GeneratorPair:
    """Drift and diffusion for the instantaneous control values."""
    M = hamiltonian_matrix(system, controls)
    kappa = np.repeat([m.damping for m in system.modes], 2)
    nbar = np.repeat([m.bath_occupancy for m in system.modes], 2)
    drift = symplectic_form(system.n_modes) @ M - np.diag(kappa / 2)
    diffusion = np.diag(kappa * (nbar + 0.5))
    return GeneratorPair(drift, diffusion)


def thermal_covariance(system: SystemSpec) -> CovarianceState:
    nbar = np.repeat([m.bath_occupancy for m in system.modes], 2)
    return CovarianceState(np.diag(nbar + 0.5), 0.0)


def _propagator(A: np.ndarray, D: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = D
    aug[n:, n:] = -A.T
    E = linalg.expm(aug * dt)
    phi = E[:n, :n]
    # E[:n, n:] = int_0^dt e^{A(dt-s)} D e^{-A^T s} ds
    noise = E[:n, n:] @ phi.T
    return phi, noise


def propagate(state: CovarianceState, gen: GeneratorPair, dt: float) -> CovarianceState:
    """Exact covariance update over one interval of constant generators."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    with np.errstate(over="ignore", invalid="ignore"):
        phi, noise = _propagator(gen.drift, gen.diffusion, dt)
        sigma = phi @ state.sigma @ phi.T + noise
    if not np.all(np.isfinite(sigma)):
        ev = np.linalg.eigvals(gen.drift)
        raise PropagationError(
            f"non-finite covariance after dt={dt}: |A dt|={np.linalg.norm(gen.drift) * dt:.3e}, "
            f"max Re eig(A)={ev.real.max():.3e}, max |eig(A)|={np.abs(ev).max():.3e}"
        )
    return CovarianceState(0.5 * (sigma + sigma.T), state.time + dt)


def occupancy(state: CovarianceState, mode: int, floor: float = 0.0) -> float:
    """Mean excitation number ``<c^dag c>`` of one mode, clamped below at ``floor``."""
    s = state.sigma
    n = 0.5 * (s[2 * mode, 2 * mode] + s[2 * mode + 1, 2 * mode + 1] - 1.0)
    return max(float(n), floor)


def occupancies(state: CovarianceState) -> np.ndarray:
    d = np.diag(state.sigma)
    return 0.5 * (d[0::2] + d[1::2] - 1.0)


def cooling_quotient(state: CovarianceState, mode: int, n_thermal: float, floor: float = EPS_N) -> float:
    if not n_thermal > 0:
        raise ValueError(f"thermal occupancy must be > 0, got {n_thermal}")
    return occupancy(state, mode, floor) / n_thermal


def steady_state(gen: GeneratorPair) -> CovarianceState:
    ev = np.linalg.eigvals(gen.drift)
    if ev.real.max() >= 0:
        raise NoSteadyStateError(
            f"drift is not Hurwitz (max Re eigenvalue {ev.real.max():.3e}); dynamics are unstable"
        )
    sigma = linalg.solve_continuous_lyapunov(gen.drift, -gen.diffusion)
    return CovarianceState(0.5 * (sigma + sigma.T), np.inf)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """Sorted symplectic spectrum; a physical state has all values >= 1/2."""
    n = sigma.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ sigma))
    return np.sort(ev)[::2]


def is_physical(sigma: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(symplectic_eigenvalues(sigma).min() >= 0.5 - tol)


def adiabatic_elimination(delta_m: float, delta_a: float, kappa_a: float, kappa_m: float, J: complex):
    """Effective magnon detuning and damping after eliminating a lossy cavity."""
    denom = delta_a**2 + kappa_a**2
    if denom == 0:
        raise ValueError("cavity detuning and damping cannot both vanish")
    w = abs(J) ** 2 / denom
    return delta_m - w * delta_a, kappa_m + w * kappa_a


def bose_occupancy(omega: float, temperature: float) -> float:
    """Bose-Einstein occupancy with hbar = k_B = 1."""
    if not omega > 0:
        raise ValueError(f"frequency must be > 0, got {omega}")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    return float(1.0 / np.expm1(omega / temperature))


@dataclass
class MomentTrajectory:
    times: np.ndarray
    sigmas: np.ndarray

    def occupancies(self) -> np.ndarray:
        d = np.diagonal(self.sigmas, axis1=1, axis2=2)
        return 0.5 * (d[:, 0::2] + d[:, 1::2] - 1.0)


def evolve(system: SystemSpec, schedule: ControlSchedule, initial: CovarianceState | None = None) -> MomentTrajectory:
    """Propagate through a piecewise-constant schedule, keeping every boundary state."""
    state = thermal_covariance(system) if initial is None else initial
    sigmas = [state.sigma]
    for row in schedule.values:
        state = propagate(state, build_generators(system, row), schedule.dt)
        sigmas.append(state.sigma)
    return MomentTrajectory(state.time - schedule.duration + schedule.boundaries, np.array(sigmas))


def bipartite_system(
    delta_m: float = 1.0,
    kappa_m: float = 0.1,
    kappa_b: float = 1e-5,
    n_thermal: float = 100.0,
    n_magnon: float = 0.0,
    coupling: complex | None = None,
    rwa: bool = False,
) -> SystemSpec:
    """Magnon ``m`` (mode 0) coupled to phonon ``b`` (mode 1, the target).

    With ``coupling=None`` the complex coupling G is control slot 0. ``rwa``
    swaps the full interaction for its beam-splitter part (real G only).
    """
    modes = (
        ModeSpec("magnon", delta_m, kappa_m, n_magnon),
        ModeSpec("phonon", 1.0, kappa_b, n_thermal),
    )
    kind = CouplingKind.BEAM_SPLITTER_RWA if rwa else CouplingKind.LINEARIZED_COMPLEX
    if coupling is None:
        c = CouplingSpec(kind, (0, 1), slot=0)
        return SystemSpec(modes, (c,), 1, 1, "bipartite")
    c = CouplingSpec(kind, (0, 1), value=coupling)
    return SystemSpec(modes, (c,), 0, 1, "bipartite")


def tripartite_system(
    omega_m: float = 1e5,
    delta_a: float = 1.0,
    dampings: Sequence[float] | None = (0.1, 1e-3, 1e-5),
    n_thermal: float = 100.0,
    n_magnon: float = 0.0,
    n_photon: float = 0.0,
) -> SystemSpec:
    """Photon ``a`` (0) - magnon ``m`` (1) - phonon ``b`` (2, the target).

    Control slot 0 is Omega_S (photon-magnon), slot 1 is Omega_P
    (magnon-phonon); both position-position couplings. ``dampings=None``
    gives the undamped model.
    """
    ka, km, kb = (0.0, 0.0, 0.0) if dampings is None else dampings
    modes = (
        ModeSpec("photon", delta_a, ka, n_photon),
        ModeSpec("magnon", omega_m, km, n_magnon),
        ModeSpec("phonon", 1.0, kb, n_thermal),
    )
    couplings = (
        CouplingSpec(CouplingKind.POSITION_POSITION, (0, 1), slot=0),
        CouplingSpec(CouplingKind.POSITION_POSITION, (1, 2), slot=1),
    )
    return SystemSpec(modes, couplings, 2, 2, "tripartite")
