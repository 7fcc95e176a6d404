import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import trapezoid

from app.core.collective_spin import (
    atomic_wigner_bloch,
    bloch_grid,
    build_spin_ops,
    coherent_spin_state,
    decay_rates,
    dicke_state,
    excited_state,
    expectation,
    ground_state,
    one_axis_twisting,
    prepare_state,
    rotation_pulse,
    spin_vector,
    superradiance_evolve,
    uniform_mixture,
)
from app.core.errors import ArgumentError, CapabilityError, UnsupportedStateError
from app.models.spin import CollectiveState, SuperradianceParams, TwistingParams


def test_two_atom_ladder():
    ops = build_spin_ops(2)
    assert np.allclose(ops.sz.diagonal(), [-2.0, 0.0, 2.0])
    splus = ops.splus.toarray()
    assert splus[1, 0] == pytest.approx(2.0 * np.sqrt(2.0))
    assert splus[2, 1] == pytest.approx(2.0 * np.sqrt(2.0))
    assert np.allclose(ops.splus.toarray(), (ops.sx + 1j * ops.sy).toarray())


def test_ladder_commutator_and_casimir():
    N = 5
    ops = build_spin_ops(N)
    sp, sm, sz = ops.splus.toarray(), ops.sminus.toarray(), ops.sz.toarray()
    assert np.allclose(sp @ sm - sm @ sp, 4.0 * sz)
    casimir = (ops.sx @ ops.sx + ops.sy @ ops.sy + ops.sz @ ops.sz).toarray()
    assert np.allclose(casimir, N * (N + 2) * np.eye(N + 1))


def test_coherent_spin_state_points_along_its_direction():
    N = 8
    assert np.allclose(spin_vector(coherent_spin_state(N, np.pi / 2.0, 0.0)), [N, 0, 0], atol=1e-10)
    assert np.allclose(spin_vector(coherent_spin_state(N, np.pi / 2.0, np.pi / 2.0)), [0, N, 0], atol=1e-10)
    assert np.allclose(spin_vector(coherent_spin_state(N, 0.0)), [0, 0, N], atol=1e-10)
    assert np.allclose(spin_vector(coherent_spin_state(N, np.pi)), [0, 0, -N], atol=1e-10)


def test_dicke_and_mixture_have_no_mean_spin():
    assert np.allclose(spin_vector(dicke_state(6, 3)), 0.0)
    assert expectation(build_spin_ops(6).sz, uniform_mixture(6)) == pytest.approx(0.0)


def test_state_validation():
    with pytest.raises(ArgumentError):
        CollectiveState.pure(np.array([1.0, 1.0]))
    with pytest.raises(ArgumentError):
        CollectiveState.diagonal(np.array([1.2, -0.2]))
    with pytest.raises(ArgumentError):
        dicke_state(4, 5)


def test_pi_pulse_inverts_the_ensemble():
    flipped = rotation_pulse(ground_state(4), "y", np.pi)
    assert flipped.probabilities[-1] == pytest.approx(1.0, abs=1e-10)
    half = rotation_pulse(ground_state(4), "y", np.pi / 2.0)
    s = spin_vector(half)
    assert abs(s[0]) == pytest.approx(4.0, abs=1e-9)
    assert s[2] == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(UnsupportedStateError):
        rotation_pulse(uniform_mixture(4), "x", 1.0)


def test_twisting_keeps_populations_and_starts_from_pi2():
    N = 10
    start = prepare_state("pi2", N)
    assert np.allclose(prepare_state("twisting", N, twisting=TwistingParams(t_h=0.0)).data, start.data)
    twisted = one_axis_twisting(start, TwistingParams(omega0=0.49, omegaJ=0.05, t_h=30.0), N)
    assert np.allclose(twisted.probabilities, start.probabilities)
    # the twist shortens the mean spin
    assert np.linalg.norm(spin_vector(twisted)) < N - 1e-3


def test_single_atom_decays_exponentially():
    gamma = 0.1
    result = superradiance_evolve(SuperradianceParams(gamma=gamma, t_h=2.0), 1)
    assert decay_rates(1)[1] == pytest.approx(4.0)
    assert result.state.data[1] == pytest.approx(np.exp(-4.0 * gamma * 2.0), abs=1e-8)


@pytest.mark.parametrize("N", [100, 1000])
def test_superradiant_burst_peaks_near_log_time(N):
    params = SuperradianceParams(gamma=0.1 / N, t_h=0.0)
    t_m = params.peak_time(N)
    result = superradiance_evolve(SuperradianceParams(gamma=params.gamma, t_h=3.0 * t_m), N)
    t_peak = result.times[np.argmax(result.intensity)] + 3.0 * t_m
    assert t_peak == pytest.approx(t_m, rel=0.3)
    assert result.magnetization[0] == pytest.approx(N)
    assert result.state.data.sum() == pytest.approx(1.0, abs=1e-9)


def test_superradiance_checkpoints_share_one_run():
    N = 20
    gamma = 0.1 / N
    marks = [0.0, 5.0, 10.0]
    result = superradiance_evolve(SuperradianceParams(gamma=gamma, t_h=10.0), N, checkpoints=marks)
    assert set(result.checkpoints) == set(marks)
    assert result.checkpoints[0.0].data[N] == pytest.approx(1.0)
    single = superradiance_evolve(SuperradianceParams(gamma=gamma, t_h=5.0), N)
    assert np.allclose(result.checkpoints[5.0].data, single.state.data, atol=1e-9)


def test_prepare_state_rejects_bad_protocols():
    with pytest.raises(ArgumentError):
        prepare_state("dicke-half", 5)
    with pytest.raises(ArgumentError):
        prepare_state("squeezed", 4)
    with pytest.raises(ArgumentError):
        prepare_state("superradiance", 4)


def test_bloch_wigner_normalization_and_orientation():
    N = 4
    theta, phi = bloch_grid(n_theta=721, n_phi=64)
    for state in (excited_state(N), coherent_spin_state(N, 1.1, 0.4), dicke_state(N, 2), uniform_mixture(N)):
        W = atomic_wigner_bloch(state, theta, phi)
        total = trapezoid(W.sum(axis=1) * (2.0 * np.pi / phi.size) * np.sin(theta), theta)
        assert total == pytest.approx(np.sqrt(4.0 * np.pi / (N + 1)), rel=1e-3)

    up = atomic_wigner_bloch(excited_state(N), np.array([0.0, np.pi]), np.zeros(1))[:, 0]
    down = atomic_wigner_bloch(ground_state(N), np.array([0.0, np.pi]), np.zeros(1))[:, 0]
    assert up[0] > up[1]
    assert down[1] > down[0]


def test_bloch_wigner_size_limit():
    with pytest.raises(CapabilityError):
        atomic_wigner_bloch(ground_state(1000), np.zeros(1), np.zeros(1))


def test_two_atom_twisting_matches_matrix_exponential():
    N = 2
    p = TwistingParams(omega0=0.49, omegaJ=0.3, t_h=7.0)
    sigma_z = np.diag([-1.0, 1.0])
    sz = np.kron(sigma_z, np.eye(2)) + np.kron(np.eye(2), sigma_z)
    H = 0.5 * p.omega0 * sz + (p.omegaJ / N) * sz @ sz
    plus = np.array([1.0, 1.0]) / np.sqrt(2.0)
    evolved = scipy.linalg.expm(-1j * p.t_h * H) @ np.kron(plus, plus)
    symmetric = np.zeros((4, 3))
    symmetric[0, 0] = 1.0
    symmetric[1, 1] = symmetric[2, 1] = 1.0 / np.sqrt(2.0)
    symmetric[3, 2] = 1.0
    twisted = one_axis_twisting(coherent_spin_state(N, np.pi / 2.0, 0.0), p, N)
    assert np.allclose(twisted.data, symmetric.T @ evolved, atol=1e-12)


def test_superradiant_magnetization_never_increases():
    N = 200
    gamma = 0.1 / N
    t_m = SuperradianceParams(gamma=gamma, t_h=0.0).peak_time(N)
    result = superradiance_evolve(SuperradianceParams(gamma=gamma, t_h=5.0 * t_m), N)
    assert result.magnetization[0] == pytest.approx(N)
    assert np.all(np.diff(result.magnetization) <= 1e-9)
    assert result.magnetization[-1] < -0.9 * N


def test_half_excited_dicke_wigner_is_an_equatorial_ring():
    N = 10
    theta, phi = bloch_grid(n_theta=721, n_phi=36)
    W = atomic_wigner_bloch(dicke_state(N, N // 2), theta, phi)
    assert np.allclose(W, W[:, :1], atol=1e-12)
    assert np.allclose(W, W[::-1], atol=1e-10)

    # weight against 3cos^2 - 1 tracks <3 Jz^2 - J^2>: -30 for the ring, -22.5 for the x-polarized state
    def quadrupole(state):
        values = atomic_wigner_bloch(state, theta, phi).mean(axis=1)
        return trapezoid(values * (3.0 * np.cos(theta) ** 2 - 1.0) * np.sin(theta), theta)

    ring, polarized = quadrupole(dicke_state(N, N // 2)), quadrupole(coherent_spin_state(N, np.pi / 2.0, 0.0))
    assert ring < polarized < 0
    assert ring / polarized == pytest.approx(30.0 / 22.5, rel=1e-3)
