import numpy as np
import pytest

from app.core.atomic_model import (
    absorbing_potential,
    build_hamiltonian,
    build_potential,
    diagonalize,
    free_particle_levels,
    solve_atom,
    validate_grid,
)
from app.core.errors import ConfigurationError
from app.models.atomic import GridSpec, SoftCoulombParams
from app.utils.units import to_atomic_units


def test_working_point_grid_size():
    grid = GridSpec.from_box(L=150.0, dx=0.7)
    assert grid.M == 429
    assert grid.x0 == pytest.approx(135.0)
    assert np.allclose(np.diff(grid.points), 0.7)
    assert grid.points.mean() == pytest.approx(0.0, abs=1e-12)


def test_working_point_ground_level(atom_params):
    spectrum = solve_atom(GridSpec.from_box(L=150.0, dx=0.7), atom_params)
    assert spectrum.M == 429
    # three-point stencil error at dx = 0.7
    assert spectrum.energies[0].real == pytest.approx(-0.801, abs=2e-3)
    assert spectrum.energies[0].real == pytest.approx(-0.792, abs=0.01)
    assert spectrum.bound_count >= 1


def test_ionization_potential_calibration(atom_params):
    spectrum = solve_atom(GridSpec.from_box(L=150.0, dx=0.175), atom_params)
    assert spectrum.energies[0].real == pytest.approx(-0.792, abs=0.008)
    assert spectrum.ionization_potential == pytest.approx(0.792, rel=0.01)


def test_ground_level_converges_monotonically_as_dx_halves(atom_params):
    levels = [solve_atom(GridSpec.from_box(L=40.0, dx=dx), atom_params).energies[0].real
              for dx in (0.7, 0.35, 0.175)]
    steps = np.diff(levels)
    assert np.all(steps > 0)
    assert steps[1] < steps[0]
    assert steps[1] < 2e-3


def test_hamiltonian_from_complex_potential(small_grid):
    potential = build_potential(small_grid, SoftCoulombParams(a=0.816, cab=1e-2))
    assert np.iscomplexobj(potential) and np.any(potential.imag)
    H = build_hamiltonian(small_grid, potential)
    assert H.shape == (small_grid.M, small_grid.M)
    assert np.iscomplexobj(H)
    assert np.array_equal(H, H.T)
    assert np.allclose(np.diag(H), 1.0 / small_grid.dx ** 2 + potential)
    assert np.allclose(np.diag(H, 1), -0.5 / small_grid.dx ** 2)
    assert np.count_nonzero(np.triu(H, 2)) == 0


def test_absorber_leaves_localized_levels_unbroadened():
    spectrum = solve_atom(GridSpec.from_box(L=150.0, dx=0.7), SoftCoulombParams())
    deep = spectrum.energies.real < -0.05
    assert deep.sum() >= 2
    assert np.all(np.abs(spectrum.energies[deep].imag) < 1e-6)
    # levels near threshold reach past the onset and pick up a small width
    assert spectrum.bound_width(-0.05) < 1e-6
    assert spectrum.bound_width() < 1e-3


def test_free_particle_levels_match_stencil(small_grid):
    spectrum = diagonalize(build_hamiltonian(small_grid, np.zeros(small_grid.M, dtype=complex)), small_grid)
    assert np.allclose(spectrum.energies.real, free_particle_levels(small_grid), atol=1e-10)


def test_eigenvectors_are_c_normalized(small_grid):
    spectrum = solve_atom(small_grid, SoftCoulombParams(a=0.816, cab=1e-3))
    norms = np.sum(spectrum.states * spectrum.states, axis=0) * small_grid.dx
    assert np.allclose(norms, 1.0, atol=1e-10)
    # the eigenbasis dipole stays complex symmetric
    assert np.allclose(spectrum.D, spectrum.D.T, atol=1e-10)


def test_energies_sorted_by_real_part(small_grid):
    spectrum = solve_atom(small_grid, SoftCoulombParams(a=0.816, cab=1e-3))
    assert np.all(np.diff(spectrum.energies.real) >= 0)


def test_absorber_vanishes_inside_onset():
    x = np.array([-30.0, -10.0, 0.0, 10.0, 30.0])
    cap = absorbing_potential(x, x0=20.0, cab=1e-3)
    assert np.all(cap[1:4] == 0)
    assert cap[0].imag == pytest.approx(-1e-3 * 1000.0)
    assert cap[4] == cap[0]


def test_grid_report_flags_coarse_spacing():
    omega_d = to_atomic_units(1.55, "eV")
    good = validate_grid(GridSpec.from_box(150.0, 0.7), SoftCoulombParams(), omega_d)
    assert good.ok
    assert all(c.margin > 0 for c in good.checks)

    bad = validate_grid(GridSpec.from_box(150.0, 1.5), SoftCoulombParams(), omega_d)
    assert not bad.ok
    assert [c.name for c in bad.failures()] == ["dx < sqrt(2)*a"]
    with pytest.raises(ConfigurationError):
        bad.raise_for_failure()


def test_potential_rejects_unresolved_core():
    with pytest.raises(ConfigurationError):
        build_potential(GridSpec.from_box(20.0, 1.5), SoftCoulombParams(a=0.816))


def test_grid_needs_three_points():
    with pytest.raises(ConfigurationError):
        GridSpec.from_box(L=1.0, dx=1.0)
