import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magnocool.dynamics import (
    PERIOD,
    ControlSchedule,
    CouplingKind,
    CouplingSpec,
    ModeSpec,
    SystemSpec,
    bipartite_system,
    tripartite_system,
)
from magnocool.oracle import (
    FockConfig,
    build_hamiltonian,
    cross_check,
    destroy,
    evolve_qme,
    lindblad_rhs,
    moments_from_density,
    thermal_density,
    trajectory_trace,
)


def test_fock_config_limits():
    with pytest.raises(ValueError):
        FockConfig((1, 4))
    with pytest.raises(ValueError, match="MiB"):
        FockConfig((20, 20, 20))
    assert FockConfig((4, 4, 6)).dim == 96


def test_single_mode_hamiltonian():
    system = SystemSpec((ModeSpec("b", 1.0),))
    H = build_hamiltonian(system, [], FockConfig((3,)))
    np.testing.assert_allclose(H, np.diag([0, 1, 2]), atol=1e-15)


def test_uncoupled_hamiltonian_is_number_diagonal():
    system = bipartite_system(delta_m=1.7)
    fock = FockConfig((3, 4))
    H = build_hamiltonian(system, [0.0], fock)
    nm, nb = np.meshgrid(np.arange(3), np.arange(4), indexing="ij")
    np.testing.assert_allclose(H, np.diag((1.7 * nm + nb).ravel()))


def test_bipartite_coupling_matrix_elements():
    G = 0.3
    system = bipartite_system()
    fock = FockConfig((4, 4))
    H = build_hamiltonian(system, [G], fock)
    np.testing.assert_allclose(H, H.conj().T)

    def idx(m, b):
        return m * 4 + b

    # <m+1, b+1| G* m^dag b^dag |m, b> = G sqrt(m+1) sqrt(b+1)
    assert H[idx(2, 2), idx(1, 1)] == pytest.approx(G * np.sqrt(2) * np.sqrt(2))
    # <m+1, b-1| m^dag b |m, b>
    assert H[idx(2, 0), idx(1, 1)] == pytest.approx(G * np.sqrt(2))
    assert H[idx(0, 2), idx(1, 1)] == pytest.approx(G * np.sqrt(2))
    assert H[idx(0, 0), idx(1, 1)] == pytest.approx(G)
    # no m-only or b-only transitions
    assert H[idx(2, 1), idx(1, 1)] == 0 and H[idx(1, 2), idx(1, 1)] == 0


def test_rhs_zero_without_dynamics():
    system = SystemSpec((ModeSpec("b", 1.0),))
    fock = FockConfig((4,))
    rho = thermal_density(SystemSpec((ModeSpec("b", 1.0, 0.0, 1.0),)), fock)
    out = lindblad_rhs(rho, np.zeros((4, 4)), system, fock)
    assert np.all(out == 0)


def test_spontaneous_decay_rate():
    kappa = 0.7
    system = SystemSpec((ModeSpec("b", 1.0, kappa, 0.0),))
    fock = FockConfig((4,))
    rho = np.zeros((4, 4), complex)
    rho[1, 1] = 1
    out = lindblad_rhs(rho, build_hamiltonian(system, [], fock), system, fock)
    n = np.diag(np.arange(4))
    assert np.trace(out @ n).real == pytest.approx(-kappa)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rhs_is_traceless(seed):
    rng = np.random.default_rng(seed)
    system = bipartite_system(kappa_m=rng.uniform(0, 1), kappa_b=rng.uniform(0, 1),
                              n_thermal=rng.uniform(0, 2), n_magnon=rng.uniform(0, 2))
    fock = FockConfig((3, 4))
    X = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    H = build_hamiltonian(system, [rng.normal() + 1j * rng.normal()], fock)
    assert abs(np.trace(lindblad_rhs(rho, H, system, fock))) < 1e-12


def test_thermal_fixed_point():
    system = bipartite_system(kappa_m=0.2, kappa_b=0.1, n_thermal=0.3, n_magnon=0.1)
    fock = FockConfig((4, 4))
    rho0 = thermal_density(system, fock, normalize=False)
    sched = ControlSchedule(PERIOD, np.zeros(10))
    traj = evolve_qme(rho0, system, sched, fock)
    # the truncated product state is only stationary up to the top-level leak
    assert np.max(np.abs(traj.rhos[-1] - traj.rhos[0])) < 1e-3
    system0 = bipartite_system(kappa_m=0.2, kappa_b=0.1, n_thermal=0.0, n_magnon=0.0)
    rho_vac = thermal_density(system0, fock)
    traj = evolve_qme(rho_vac, system0, sched, fock)
    assert np.max(np.abs(traj.rhos[-1] - rho_vac)) < 1e-6


def test_single_mode_decay_closed_form():
    kappa, nbar, n0 = 0.5, 0.2, 2
    system = SystemSpec((ModeSpec("b", 1.0, kappa, nbar),))
    fock = FockConfig((14,))
    rho0 = np.zeros((14, 14), complex)
    rho0[n0, n0] = 1
    sched = ControlSchedule(0.5, np.zeros((8, 0)))
    traj = evolve_qme(rho0, system, sched, fock)
    for t, r in zip(traj.times, traj.rhos):
        n = moments_from_density(r, system, fock)[1][0]
        assert n == pytest.approx(nbar + (n0 - nbar) * np.exp(-kappa * t), abs=1e-4)
    assert traj.trace_drift < 1e-6


def test_moments_of_vacuum_and_thermal():
    system = SystemSpec((ModeSpec("a", 1.0), ModeSpec("b", 1.0, 0.0, 1.0)))
    fock = FockConfig((3, 30))
    rho = thermal_density(system, fock)
    sigma, occ, means = moments_from_density(rho, system, fock)
    np.testing.assert_allclose(sigma.sigma[:2, :2], 0.5 * np.eye(2), atol=1e-12)
    assert occ[0] == pytest.approx(0.0, abs=1e-12)
    # geometric tail beyond n = 29 at n = 1 is 2^-30
    assert occ[1] == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(means)) < 1e-10


def test_moments_of_coherent_state():
    # first moments are reported and subtracted from the covariance
    n = 25
    alpha = 0.6 - 0.3j
    k = np.arange(n)
    from scipy.special import factorial

    psi = np.exp(-abs(alpha) ** 2 / 2) * alpha**k / np.sqrt(factorial(k))
    rho = np.outer(psi, psi.conj())
    system = SystemSpec((ModeSpec("a", 1.0),))
    sigma, occ, means = moments_from_density(rho, system, FockConfig((n,)))
    np.testing.assert_allclose(means, np.sqrt(2) * np.array([alpha.real, alpha.imag]), atol=1e-10)
    np.testing.assert_allclose(sigma.sigma, 0.5 * np.eye(2), atol=1e-10)
    assert occ[0] == pytest.approx(abs(alpha) ** 2, abs=1e-10)


def test_destroy():
    a = destroy(4)
    np.testing.assert_allclose((a.conj().T @ a).diagonal(), [0, 1, 2, 3])


def test_bipartite_cross_check_weak_coupling():
    system = bipartite_system(kappa_m=0.1, kappa_b=1e-5, n_thermal=0.5)
    sched = ControlSchedule(0.1 * PERIOD, np.full(50, 0.05 + 0j))
    cc = cross_check(system, sched, FockConfig((6, 6)))
    assert cc.error < 1e-3
    # and the phonon number itself, relative
    rel = np.abs(cc.n_moments[:, 1] - cc.n_oracle[:, 1]) / cc.n_oracle[:, 1]
    assert rel.max() < 1e-3


def test_tripartite_cross_check_small():
    system = tripartite_system(omega_m=3.0, delta_a=1.0, dampings=(0.05, 0.01, 0.001), n_thermal=0.05)
    sched = ControlSchedule(0.1 * PERIOD, np.tile([0.15, 0.12], (50, 1)))
    cc = cross_check(system, sched, FockConfig((4, 4, 6)))
    assert cc.reliable
    assert cc.error < 1e-3


def test_truncation_flag():
    # strong ultrastrong pumping fills the top Fock level
    system = bipartite_system(n_thermal=0.5)
    sched = ControlSchedule(0.1 * PERIOD, np.full(10, 1.5 + 0j))
    traj = evolve_qme(thermal_density(system, FockConfig((4, 4))), system, sched, FockConfig((4, 4)))
    assert not traj.reliable


def test_trajectory_trace_export():
    system = bipartite_system(n_thermal=0.5)
    fock = FockConfig((4, 4))
    sched = ControlSchedule(0.1 * PERIOD, np.full(5, 0.05 + 0j))
    traj = evolve_qme(thermal_density(system, fock), system, sched, fock)
    tr = trajectory_trace(traj, system, sched, fock)
    assert len(tr) == 5 and tr.mode_labels == ("magnon", "phonon")
    assert tr.complex_slots == (True,)


def test_schedule_too_short():
    system = bipartite_system(n_thermal=0.5)
    fock = FockConfig((3, 3))
    with pytest.raises(ValueError):
        evolve_qme(thermal_density(system, fock), system, ControlSchedule(1.0, np.zeros(2)), fock, t_end=5.0)


def test_rwa_coupling_in_fock_space():
    system = SystemSpec((ModeSpec("m", 1.0), ModeSpec("b", 1.0)),
                        (CouplingSpec(CouplingKind.BEAM_SPLITTER_RWA, (0, 1), value=0.25),))
    fock = FockConfig((3, 3))
    rho0 = np.zeros((9, 9), complex)
    rho0[3, 3] = 1  # |1, 0>
    sched = ControlSchedule(np.pi / 0.25 / 2, np.zeros((1, 0)))
    traj = evolve_qme(rho0, system, sched, fock)
    occ = moments_from_density(traj.rhos[-1], system, fock)[1]
    np.testing.assert_allclose(occ, [0.0, 1.0], atol=1e-8)
