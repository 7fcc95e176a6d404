import numpy as np
import pytest

from app.core.atomic_model import solve_atom
from app.core.collective_spin import excited_state, ground_state
from app.core.errors import ArgumentError
from app.core.pulse_propagation import (
    classical_field,
    emission_spectrum,
    evolution_steps,
    harmonic_axis,
    propagate,
    spectral_dipole,
)
from app.models.pulse import DynamicalMatrixSeries, PropagationConfig, PulseSpec, SpectralDipole
from app.utils.units import SPEED_OF_LIGHT_AU, to_atomic_units


@pytest.fixture
def small_spectrum(small_grid, atom_params):
    return solve_atom(small_grid, atom_params)


def test_field_ramps_to_zero_at_the_edges():
    pulse = PulseSpec(E0=0.05, omega_d=0.3, n_cycles=8)
    assert classical_field(0.0, pulse) == 0.0
    assert classical_field(pulse.t_f, pulse) == pytest.approx(0.0, abs=1e-15)
    t = np.linspace(0.0, pulse.t_f, 2001)
    assert np.abs(classical_field(t, pulse)).max() <= pulse.E0 + 1e-15


def test_cutoff_at_working_point():
    pulse = PulseSpec(E0=to_atomic_units(60.0, "GV/m"), omega_d=to_atomic_units(1.55, "eV"), n_cycles=40)
    assert pulse.ponderomotive_energy == pytest.approx(1.049, abs=2e-3)
    assert pulse.cutoff_harmonic(0.792) == 72


def test_field_free_dipole_only_picks_up_phases(small_spectrum):
    pulse = PulseSpec(E0=0.0, omega_d=0.3, n_cycles=4)
    (series,) = propagate(small_spectrum, pulse, PropagationConfig.for_pulse(pulse, 32))
    D = small_spectrum.D
    assert np.allclose(series.values[0], D[:2, :2])
    assert np.allclose(np.abs(series.values[:, 0, 1]), abs(D[0, 1]), atol=1e-12)


def test_full_propagator_stays_unitary_without_absorber(small_spectrum):
    pulse = PulseSpec(E0=0.02, omega_d=0.3, n_cycles=4)
    cfg = PropagationConfig.for_pulse(pulse, 16)
    *_, (step, t, F) = evolution_steps(small_spectrum, pulse, cfg, columns=None)
    assert step == cfg.n_steps
    assert t == pytest.approx(pulse.t_f)
    assert np.allclose(F.conj().T @ F, np.eye(small_spectrum.M), atol=1e-8)


def test_progress_callback_reaches_the_end(small_spectrum):
    pulse = PulseSpec(E0=0.02, omega_d=0.3, n_cycles=4)
    calls = []
    propagate(small_spectrum, pulse, PropagationConfig.for_pulse(pulse, 16), on_progress=lambda s, n: calls.append((s, n)))
    assert calls[-1] == (64, 64)


def test_harmonic_axis_contains_exact_harmonics():
    omegas = harmonic_axis(0.057, 9, samples_per_harmonic=20)
    for n in range(1, 10):
        assert np.isclose(omegas, n * 0.057, rtol=1e-12, atol=0.0).any()


def test_spectral_dipole_of_constant_series():
    times = np.linspace(0.0, 2.0 * np.pi, 401)
    values = np.ones((times.size, 2, 2), dtype=complex)
    dipole = spectral_dipole(DynamicalMatrixSeries(times=times, values=values), np.array([1.0, 2.0]))
    # full periods integrate to zero
    assert np.allclose(dipole.values, 0.0, atol=1e-12)
    with pytest.raises(ArgumentError):
        dipole.at(1.5)


def test_emission_counts_coherent_and_incoherent_parts():
    rng = np.random.default_rng(7)
    d = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
    dipole = SpectralDipole(frequencies=np.array([0.5, 1.0]), values=d)
    N = 3
    prefactor = (2.0 / 3.0) * dipole.frequencies ** 4 / (np.pi * SPEED_OF_LIGHT_AU ** 3)

    ground = emission_spectrum(dipole, ground_state(N), N)
    expected = N ** 2 * np.abs(d[:, 0, 0]) ** 2 + N * np.abs(d[:, 1, 0]) ** 2
    assert np.allclose(ground, prefactor * expected)

    excited = emission_spectrum(dipole, excited_state(N), N)
    expected = N ** 2 * np.abs(d[:, 1, 1]) ** 2 + N * np.abs(d[:, 0, 1]) ** 2
    assert np.allclose(excited, prefactor * expected)


def test_emission_rejects_mismatched_state():
    dipole = SpectralDipole(frequencies=np.array([1.0]), values=np.zeros((1, 2, 2), dtype=complex))
    with pytest.raises(ArgumentError):
        emission_spectrum(dipole, ground_state(2), 3)


def test_reversed_drive_flips_only_the_diagonal_dipole(small_spectrum):
    # parity: E -> -E maps d_gg, d_ee to minus themselves and leaves d_ge, so even harmonics cancel
    pulse = PulseSpec(E0=0.03, omega_d=0.057, n_cycles=4)
    flipped = PulseSpec(E0=0.03, omega_d=0.057, n_cycles=4, cep=np.pi)
    cfg = PropagationConfig.for_pulse(pulse, 32)
    (forward,) = propagate(small_spectrum, pulse, cfg)
    (backward,) = propagate(small_spectrum, flipped, cfg)
    assert np.abs(forward.values[:, 0, 0] - forward.values[0, 0, 0]).max() > 1e-3
    assert np.allclose(backward.values[:, 0, 0], -forward.values[:, 0, 0], atol=1e-8)
    assert np.allclose(backward.values[:, 1, 1], -forward.values[:, 1, 1], atol=1e-8)
    assert np.allclose(backward.values[:, 0, 1], forward.values[:, 0, 1], atol=1e-8)
