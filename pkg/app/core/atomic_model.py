# app/core/atomic_model.py
import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from app.core.errors import ArgumentError, ConfigurationError, NumericalError
from app.models.atomic import AtomicSpectrum, GridCheck, GridReport, GridSpec, SoftCoulombParams

logger = logging.getLogger(__name__)


def validate_grid(grid: GridSpec, params: SoftCoulombParams, drive_freq: float) -> GridReport:
    """
    Check the two resolution conditions: dx < sqrt(2) a and L dx > 2 / omega_d.
    Never raises; callers decide with `report.raise_for_failure()`.
    """
    return GridReport(checks=[
        GridCheck(name="dx < sqrt(2)*a", lhs=grid.dx, rhs=float(np.sqrt(2.0) * params.a)),
        GridCheck(name="2/omega_d < L*dx", lhs=2.0 / drive_freq, rhs=grid.L * grid.dx),
    ])


def soft_coulomb(x: np.ndarray, a: float) -> np.ndarray:
    return -1.0 / np.sqrt(np.asarray(x, dtype=float) ** 2 + a ** 2) + 0j


def absorbing_potential(x: np.ndarray, x0: float, cab: float) -> np.ndarray:
    """-i cab (|x| - x0)^3 beyond the onset, zero inside."""
    depth = np.clip(np.abs(np.asarray(x, dtype=float)) - x0, 0.0, None)
    return -1j * cab * depth ** 3


def build_potential(grid: GridSpec, params: SoftCoulombParams) -> np.ndarray:
    if not grid.dx < np.sqrt(2.0) * params.a:
        raise ConfigurationError(
            f"Grid violates dx < sqrt(2)*a: dx={grid.dx}, sqrt(2)*a={np.sqrt(2.0) * params.a:.6g}"
        )
    x = grid.points
    return soft_coulomb(x, params.a) + absorbing_potential(x, grid.x0, params.cab)


def build_hamiltonian(grid: GridSpec, potential: np.ndarray) -> np.ndarray:
    if potential.shape != (grid.M,):
        raise ArgumentError(f"Potential has shape {potential.shape}, expected ({grid.M},).")
    off = np.full(grid.M - 1, -0.5 / grid.dx ** 2)
    kinetic = sp.diags([off, np.full(grid.M, 1.0 / grid.dx ** 2), off], [-1, 0, 1], format="csr", dtype=complex)
    return (kinetic + sp.diags(np.asarray(potential, dtype=complex), format="csr")).toarray()


def free_particle_levels(grid: GridSpec) -> np.ndarray:
    k = np.arange(1, grid.M + 1)
    return (1.0 - np.cos(k * np.pi / (grid.M + 1))) / grid.dx ** 2


def _c_normalize(vectors: np.ndarray, dx: float) -> np.ndarray:
    norms = np.sqrt(np.sum(vectors * vectors, axis=0) * dx)
    if np.any(np.abs(norms) < 1e-300):
        raise NumericalError("Eigenvector with vanishing c-norm; the spectrum is defective.")
    return vectors / norms


def diagonalize(H: np.ndarray, grid: GridSpec) -> AtomicSpectrum:
    hermitian = not np.any(H.imag)
    try:
        if hermitian:
            energies, vectors = scipy.linalg.eigh(H.real)
            energies = energies.astype(complex)
        else:
            energies, vectors = scipy.linalg.eig(H)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        cond = float(np.linalg.cond(H))
        raise NumericalError(f"Eigensolver failed ({exc}); cond(H) = {cond:.3e}", condition_number=cond)

    order = np.lexsort((energies.imag, energies.real))
    energies = energies[order]
    states = _c_normalize(vectors[:, order].astype(complex), grid.dx)

    x = grid.points
    D = states.T @ (x[:, None] * states) * grid.dx
    logger.debug("Diagonalized M=%d; ground level %.6f", grid.M, energies[0].real)
    return AtomicSpectrum(grid=grid, energies=energies, states=states, D=D)


def solve_atom(grid: GridSpec, params: SoftCoulombParams) -> AtomicSpectrum:
    H = build_hamiltonian(grid, build_potential(grid, params))
    spectrum = diagonalize(H, grid)
    logger.info(
        "Atom solved: M=%d, I_p=%.5f, bound levels=%d, largest bound width %.2e",
        spectrum.M, spectrum.ionization_potential, spectrum.bound_count, spectrum.bound_width(),
    )
    return spectrum
