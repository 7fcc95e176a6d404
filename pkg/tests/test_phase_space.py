import numpy as np
import pytest

from app.core.collective_spin import dicke_state, excited_state
from app.core.errors import ArgumentError, CapabilityError
from app.core.harmonic_modes import mode_from_matrix, photonic_operator
from app.core.phase_space import (
    batch_standard_error,
    classical_fields,
    classical_statistics,
    fit_sigma_scaling,
    fit_theta_distribution,
    sample_initial_conditions,
    twist_ensemble,
)
from app.core.quantum_statistics import g2_and_mandel, moments
from app.models.phase_space import ThetaDistribution, TrajectoryEnsemble
from app.models.spin import SpinSpace, TwistingParams

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_default_width_follows_power_law():
    dist = fit_theta_distribution("up", 100)
    assert dist.sigma == pytest.approx(0.100, rel=2e-3)
    assert fit_theta_distribution("down", 100).theta0 == pytest.approx(np.pi)
    assert fit_theta_distribution("half", 100).theta0 == pytest.approx(np.pi / 2.0)


def test_unknown_family_and_large_refit_are_refused():
    with pytest.raises(CapabilityError):
        fit_theta_distribution("sideways", 10)
    with pytest.raises(CapabilityError):
        fit_theta_distribution("up", 5000, refit=True)
    with pytest.raises(ArgumentError):
        fit_sigma_scaling("up", [100])


def test_refit_reproduces_default_coefficient():
    dist = fit_theta_distribution("up", 100, refit=True)
    assert dist.a2 == pytest.approx(0.4741)
    assert dist.a1 == pytest.approx(0.8887, rel=0.1)


def test_sampling_is_deterministic_per_seed():
    dist = fit_theta_distribution("up", 50)
    first = sample_initial_conditions(dist, 50, 500, seed=11)
    second = sample_initial_conditions(dist, 50, 500, seed=11)
    other = sample_initial_conditions(dist, 50, 500, seed=12)
    assert np.array_equal(first.S_points, second.S_points)
    assert not np.array_equal(first.S_points, other.S_points)
    assert np.allclose(np.linalg.norm(first.S_points, axis=1), 50.0)


def test_family_orientation():
    N, R = 100, 2000
    down = sample_initial_conditions(fit_theta_distribution("down", N), N, R, seed=1)
    assert down.mean_spin()[2] < -0.9 * N
    right = sample_initial_conditions(fit_theta_distribution("right", N), N, R, seed=1)
    assert right.mean_spin()[0] > 0.9 * N
    assert abs(right.mean_spin()[2]) < 0.1 * N


def test_vanishing_width_samples_the_pole():
    dist = ThetaDistribution(family="up", theta0=0.0, sigma=1e-9, a1=0.8887, a2=0.4741)
    ens = sample_initial_conditions(dist, 40, 200, seed=5)
    assert np.allclose(ens.S_points[:, 2], 40.0, rtol=1e-12)


def test_classical_twisting_precesses_counterclockwise():
    ens = TrajectoryEnsemble(N=10, S_points=np.array([[10.0, 0.0, 0.0], [0.0, 8.0, 6.0]]))
    twisted = twist_ensemble(ens, TwistingParams(omega0=0.49, omegaJ=0.0, t_h=1.0), 10)
    assert np.allclose(twisted.S_points[0], [10.0 * np.cos(0.49), 10.0 * np.sin(0.49), 0.0])
    sheared = twist_ensemble(ens, TwistingParams(omega0=0.0, omegaJ=0.5, t_h=1.0), 10)
    angle = 4.0 * 0.5 * 6.0 / 10.0
    assert np.allclose(sheared.S_points[1], [-8.0 * np.sin(angle), 8.0 * np.cos(angle), 6.0])
    assert np.allclose(sheared.S_points[0], ens.S_points[0])
    with pytest.raises(ArgumentError):
        twist_ensemble(ens, TwistingParams(), 11)


def test_vacuum_noise_carries_one_half_photon_per_quadrature():
    N = 20
    ens = sample_initial_conditions(fit_theta_distribution("up", N), N, 20000, seed=2)
    alpha = classical_fields(ens, mode_from_matrix(15, np.zeros((2, 2)), N), seed=3)
    assert np.mean(np.abs(alpha) ** 2) == pytest.approx(1.0, abs=0.03)
    assert ens.alpha_fields[15] is alpha
    assert ens.seeds["noise_15"] == 3


def test_coherent_drive_has_poisson_like_statistics():
    N = 30
    ens = sample_initial_conditions(fit_theta_distribution("down", N), N, 20000, seed=4)
    alpha = classical_fields(ens, mode_from_matrix(21, 0.1 * np.eye(2), N), seed=5)
    summary = classical_statistics(alpha)
    assert summary.nbar == pytest.approx(9.0, rel=0.02)
    assert summary.g2 == pytest.approx(1.0, abs=0.05)
    assert summary.nbar_se > 0
    assert summary.density.norm() == pytest.approx(1.0, abs=1e-3)


def test_paired_fields_report_correlations():
    N = 30
    ens = sample_initial_conditions(fit_theta_distribution("down", N), N, 5000, seed=6)
    alpha = classical_fields(ens, mode_from_matrix(21, 0.1 * np.eye(2), N), seed=7)
    summary = classical_statistics(alpha, alpha)
    assert summary.joint.pearson == pytest.approx(1.0)
    assert summary.pearson_se == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ArgumentError):
        classical_statistics(alpha, alpha[:10])


@pytest.mark.parametrize("family, R", [("half", 20000), ("up", 50000)])
def test_trajectory_g2_tracks_exact_g2(family, R):
    N = 100
    dn = 0.1 * SIGMA_X if family == "half" else 0.3 * SIGMA_X
    state = dicke_state(N, N // 2) if family == "half" else excited_state(N)
    exact, _, _ = g2_and_mandel(moments(photonic_operator(dn, SpinSpace(N)), state, 2, center=True))

    ens = sample_initial_conditions(fit_theta_distribution(family, N), N, R, seed=8)
    summary = classical_statistics(classical_fields(ens, mode_from_matrix(21, dn, N), seed=9))
    assert summary.g2 == pytest.approx(exact, rel=0.05)


def test_batch_error_of_constant_samples_is_zero():
    assert batch_standard_error(np.ones(100), np.mean) == 0.0
    assert np.isnan(batch_standard_error(np.ones(1), np.mean))
