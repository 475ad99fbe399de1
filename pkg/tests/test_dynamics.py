import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magnocool.dynamics import (
    EPS_N,
    PERIOD,
    ControlSchedule,
    CouplingKind,
    CouplingSpec,
    CovarianceState,
    GeneratorPair,
    ModeSpec,
    NoSteadyStateError,
    PropagationError,
    SystemSpec,
    adiabatic_elimination,
    bipartite_system,
    bose_occupancy,
    build_generators,
    cooling_quotient,
    evolve,
    hamiltonian_matrix,
    is_physical,
    occupancies,
    occupancy,
    propagate,
    steady_state,
    symplectic_eigenvalues,
    thermal_covariance,
    tripartite_system,
)


def single_mode(kappa=0.3, nbar=2.0, freq=1.0):
    return SystemSpec((ModeSpec("b", freq, kappa, nbar),))


# -- construction ----------------------------------------------------------------

def test_mode_validation():
    with pytest.raises(ValueError):
        ModeSpec("x", 0.0)
    with pytest.raises(ValueError):
        ModeSpec("x", 1.0, damping=-1)
    with pytest.raises(ValueError):
        ModeSpec("x", 1.0, bath_occupancy=-0.1)


def test_coupling_and_slot_validation():
    modes = (ModeSpec("a", 1.0), ModeSpec("b", 1.0))
    with pytest.raises(ValueError):
        CouplingSpec(CouplingKind.POSITION_POSITION, (0, 0), value=1.0)
    with pytest.raises(ValueError):
        SystemSpec(modes, (CouplingSpec(CouplingKind.POSITION_POSITION, (0, 2), value=1.0),))
    # slot 1 declared but unused
    with pytest.raises(ValueError):
        SystemSpec(modes, (CouplingSpec(CouplingKind.POSITION_POSITION, (0, 1), slot=0),), n_control_slots=2)


def test_decoupled_generator_blocks():
    system = bipartite_system(kappa_m=0.1, kappa_b=1e-5)
    gen = build_generators(system, [0.0])
    A = gen.drift
    for j, k in enumerate((0.1, 1e-5)):
        blk = A[2 * j:2 * j + 2, 2 * j:2 * j + 2]
        np.testing.assert_allclose(blk, [[-k / 2, 1.0], [-1.0, -k / 2]], atol=1e-15)
    assert np.all(A[0:2, 2:4] == 0) and np.all(A[2:4, 0:2] == 0)
    np.testing.assert_allclose(np.diag(gen.diffusion), [0.05, 0.05, 1e-5 * 100.5, 1e-5 * 100.5])


def test_real_G_couples_to_phonon_position_only():
    system = bipartite_system()
    A = build_generators(system, [0.3]).drift
    # rows of the magnon block only see x_b (column 2), never p_b (column 3)
    assert A[0, 3] == 0 and A[1, 3] == 0
    assert A[1, 2] != 0


def test_controls_rejected():
    system = bipartite_system()
    with pytest.raises(ValueError):
        build_generators(system, [np.nan])
    with pytest.raises(ValueError):
        build_generators(system, [1.0, 2.0])
    with pytest.raises(ValueError):
        build_generators(tripartite_system(omega_m=10.0), [1j, 0.0])


def test_hamiltonian_matches_ladder_algebra():
    # H = w1 a^dag a + w2 b^dag b + (G a + G* a^dag)(b + b^dag), compared through
    # the quadrature form r^T M r / 2 evaluated on random c-number amplitudes.
    G = 0.37 - 0.21j
    system = SystemSpec((ModeSpec("a", 1.3), ModeSpec("b", 0.7)),
                        (CouplingSpec(CouplingKind.LINEARIZED_COMPLEX, (0, 1), value=G),))
    M = hamiltonian_matrix(system)
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        r = np.sqrt(2) * np.array([a.real, a.imag, b.real, b.imag])
        classical = 1.3 * abs(a) ** 2 + 0.7 * abs(b) ** 2 + ((G * a + np.conj(G) * np.conj(a)) * (b + np.conj(b))).real
        assert np.isclose(0.5 * r @ M @ r, classical)


# -- thermal state, occupancy -----------------------------------------------------

def test_thermal_covariance_blocks():
    system = bipartite_system(n_thermal=100.0, n_magnon=0.0)
    s = thermal_covariance(system)
    np.testing.assert_array_equal(s.sigma, np.diag([0.5, 0.5, 100.5, 100.5]))
    assert s.time == 0.0
    np.testing.assert_allclose(occupancies(s), [0.0, 100.0])
    assert cooling_quotient(s, 1, 100.0) == pytest.approx(1.0)


def test_occupancy_floor_and_quotient():
    s = CovarianceState(np.diag([0.5, 0.5, 0.5 - 1e-14, 0.5 - 1e-14]))
    assert occupancy(s, 1, floor=-np.inf) < 0
    assert occupancy(s, 1) == 0.0
    assert occupancy(s, 1, floor=EPS_N) == EPS_N
    s2 = CovarianceState(np.diag([0.5, 0.5, 0.51, 0.51]))
    assert cooling_quotient(s2, 1, 100.0) == pytest.approx(1e-4)
    with pytest.raises(ValueError):
        cooling_quotient(s2, 1, 0.0)


def test_covariance_state_is_read_only():
    s = thermal_covariance(bipartite_system())
    with pytest.raises(ValueError):
        s.sigma[0, 0] = 3.0


# -- propagation --------------------------------------------------------------------

def test_zero_generator_is_identity():
    s = thermal_covariance(bipartite_system())
    z = np.zeros((4, 4))
    out = propagate(s, GeneratorPair(z, z), 0.7)
    np.testing.assert_array_equal(out.sigma, s.sigma)
    assert out.time == pytest.approx(0.7)


@pytest.mark.parametrize("kappa,nbar,n0", [(0.3, 2.0, 7.0), (1.0, 0.0, 3.0), (1e-3, 50.0, 0.0)])
def test_single_mode_decay_closed_form(kappa, nbar, n0):
    system = single_mode(kappa, nbar)
    gen = build_generators(system)
    s = CovarianceState(np.eye(2) * (n0 + 0.5))
    for k in range(1, 31):
        s = propagate(s, gen, 0.25)
        t = 0.25 * k
        assert occupancy(s, 0) == pytest.approx(nbar + (n0 - nbar) * np.exp(-kappa * t), rel=1e-11, abs=1e-12)


def test_semigroup():
    system = bipartite_system()
    gen = build_generators(system, [0.4 - 0.2j])
    s0 = thermal_covariance(system)
    two = propagate(propagate(s0, gen, 0.3), gen, 0.45)
    one = propagate(s0, gen, 0.75)
    assert np.max(np.abs(two.sigma - one.sigma)) / np.max(np.abs(one.sigma)) < 1e-10


def test_thermal_fixed_point_without_coupling():
    system = tripartite_system(omega_m=5.0, n_thermal=100.0, n_magnon=0.3, n_photon=0.1)
    gen = build_generators(system, [0.0, 0.0])
    s0 = thermal_covariance(system)
    s = s0
    for _ in range(1000):
        s = propagate(s, gen, 0.1 * PERIOD)
    assert np.max(np.abs(s.sigma - s0.sigma)) < 1e-8


def test_rwa_excitation_conservation():
    system = SystemSpec((ModeSpec("m", 1.0), ModeSpec("b", 1.0)),
                        (CouplingSpec(CouplingKind.BEAM_SPLITTER_RWA, (0, 1), value=0.2),))
    s = CovarianceState(np.diag([3.5, 3.5, 0.5, 0.5]))
    gen = build_generators(system)
    total0 = occupancies(s).sum()
    for k in range(1, 101):
        s = propagate(s, gen, 0.1 * PERIOD)
        t = k * 0.1 * PERIOD
        assert abs(occupancies(s).sum() - total0) / total0 < 1e-8
        # resonant swap: n_m = 3 cos^2(G t)
        assert occupancies(s)[0] == pytest.approx(3 * np.cos(0.2 * t) ** 2, abs=1e-9)


def test_propagation_overflow_raises_with_diagnostics():
    system = bipartite_system()
    gen = build_generators(system, [40.0])
    with pytest.raises(PropagationError, match="max Re eig"):
        s = thermal_covariance(system)
        for _ in range(50):
            s = propagate(s, gen, 10 * PERIOD)


def test_evolve_keeps_boundaries():
    system = bipartite_system()
    sched = ControlSchedule(0.1 * PERIOD, np.full(20, 0.1 + 0j))
    traj = evolve(system, sched)
    assert traj.sigmas.shape == (21, 4, 4)
    np.testing.assert_allclose(traj.times, sched.boundaries)
    assert traj.occupancies()[0, 1] == pytest.approx(100.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ControlSchedule(0.0, np.zeros(3))
    with pytest.raises(ValueError):
        ControlSchedule(0.1, np.array([0.0, np.inf]))


# -- steady state -------------------------------------------------------------------

def test_steady_state_decoupled_is_thermal():
    system = bipartite_system(n_magnon=0.2)
    ss = steady_state(build_generators(system, [0.0]))
    np.testing.assert_allclose(ss.sigma, thermal_covariance(system).sigma, rtol=1e-10)


def test_steady_state_residual_and_long_time_limit():
    system = bipartite_system(kappa_b=1e-3)
    gen = build_generators(system, [0.1])
    ss = steady_state(gen)
    A, D = gen.drift, gen.diffusion
    assert np.linalg.norm(A @ ss.sigma + ss.sigma @ A.T + D) < 1e-10 * np.linalg.norm(D)
    s = thermal_covariance(system)
    for _ in range(200):
        s = propagate(s, gen, PERIOD)
    assert np.max(np.abs(s.sigma - ss.sigma)) / np.max(np.abs(ss.sigma)) < 1e-4


def test_unstable_coupling_has_no_steady_state():
    system = bipartite_system()
    with pytest.raises(NoSteadyStateError):
        steady_state(build_generators(system, [2.0]))


# -- symplectic spectrum --------------------------------------------------------------

def test_symplectic_eigenvalues_of_thermal_state():
    s = thermal_covariance(tripartite_system(n_thermal=3.0, n_magnon=1.0, n_photon=0.0))
    np.testing.assert_allclose(symplectic_eigenvalues(s.sigma), [0.5, 1.5, 3.5])
    assert is_physical(s.sigma)
    assert not is_physical(np.diag([0.3, 0.3, 0.5, 0.5]))


def test_squeezed_vacuum_is_pure():
    r = 0.8
    sigma = 0.5 * np.diag([np.exp(2 * r), np.exp(-2 * r)])
    np.testing.assert_allclose(symplectic_eigenvalues(sigma), [0.5])


# -- helper formulas ------------------------------------------------------------------

def test_adiabatic_elimination_reductions():
    assert adiabatic_elimination(1.0, 2.0, 0.5, 0.1, 0.0) == (1.0, 0.1)
    d, k = adiabatic_elimination(1.0, 0.0, 0.5, 0.1, 0.3)
    assert d == 1.0 and k == pytest.approx(0.1 + 0.09 / 0.5)
    with pytest.raises(ValueError):
        adiabatic_elimination(1.0, 0.0, 0.0, 0.1, 0.3)


def test_adiabatic_elimination_large_cavity_damping_limit():
    dev = []
    for ka in np.logspace(0, 6, 13):
        d, k = adiabatic_elimination(1.0, 2.0, ka, 0.1, 0.5 + 0.5j)
        dev.append(abs(d - 1.0) + abs(k - 0.1))
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 1e-6


def test_bose_occupancy():
    assert bose_occupancy(1.0, 0.0) == 0.0
    assert bose_occupancy(np.log(2.0), 1.0) == pytest.approx(1.0)
    # classical limit kT/w - 1/2 + w/(12 kT)
    x = 1e-3
    assert bose_occupancy(x, 1.0) == pytest.approx(1 / x - 0.5 + x / 12, rel=1e-12)
    with pytest.raises(ValueError):
        bose_occupancy(0.0, 1.0)


# -- properties ---------------------------------------------------------------------

def _random_physical(rng, n):
    """Thermal state under a random symplectic transform."""
    from scipy.linalg import expm

    H = rng.normal(size=(2 * n, 2 * n))
    H = 0.3 * (H + H.T)
    from magnocool.dynamics import symplectic_form

    S = expm(symplectic_form(n) @ H)
    nu = 0.5 + rng.exponential(1.0, size=n)
    return S @ np.diag(np.repeat(nu, 2)) @ S.T


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), w=st.floats(0.0, 1.0))
def test_affine_in_initial_state(seed, w):
    rng = np.random.default_rng(seed)
    system = bipartite_system(kappa_b=0.01)
    gen = build_generators(system, [rng.normal(0, 0.3) + 1j * rng.normal(0, 0.3)])
    s1, s2 = _random_physical(rng, 2), _random_physical(rng, 2)
    mix = propagate(CovarianceState(w * s1 + (1 - w) * s2), gen, 0.5)
    sep = w * propagate(CovarianceState(s1), gen, 0.5).sigma + (1 - w) * propagate(CovarianceState(s2), gen, 0.5).sigma
    assert np.allclose(mix.sigma, sep, rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_physicality_preserved_under_random_schedules(seed):
    rng = np.random.default_rng(seed)
    system = bipartite_system(kappa_m=rng.uniform(0, 0.5), kappa_b=rng.uniform(0, 0.1), n_thermal=rng.uniform(0, 10))
    s = CovarianceState(_random_physical(rng, 2))
    for _ in range(20):
        g = rng.uniform(-1.5, 1.5) + 1j * rng.uniform(-1.5, 1.5)
        s = propagate(s, build_generators(system, [g]), 0.1 * PERIOD)
        nu = symplectic_eigenvalues(s.sigma)
        assert nu.min() >= 0.5 - 1e-9 * max(1.0, nu.max())
