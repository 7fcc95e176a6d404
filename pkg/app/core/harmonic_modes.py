# app/core/harmonic_modes.py
import logging
from typing import Iterable, List, Tuple

import numpy as np
import scipy.sparse as sp

from app.core.collective_spin import build_spin_ops, collective_operator, expectation
from app.models.modes import DetectorSpec, HarmonicMode
from app.models.pulse import SpectralDipole
from app.models.spin import CollectiveState, SpinSpace
from app.utils.units import SPEED_OF_LIGHT_AU

logger = logging.getLogger(__name__)

# Pauli vector in the (g, e) single-atom basis, so that b^dag sigma_v b = S_v on the ladder.
PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, 1j], [-1j, 0]],
    [[-1, 0], [0, 1]],
], dtype=complex)


def mode_prefactor(n: int, det: DetectorSpec, omega_d: float) -> float:
    c = SPEED_OF_LIGHT_AU
    return float(np.sqrt((det.dOmega / (4.0 * np.pi)) * (n * omega_d) ** 3 / (np.pi * c ** 3) * det.domega))


def build_mode_matrix(dipole: SpectralDipole, n: int, det: DetectorSpec, omega_d: float) -> np.ndarray:
    det.check_window(omega_d)
    return mode_prefactor(n, det, omega_d) * dipole.at(n * omega_d)


def pauli_decompose(dn: np.ndarray, N: int) -> Tuple[complex, np.ndarray, np.ndarray]:
    dn = np.asarray(dn, dtype=complex)
    alpha = 0.5 * N * np.trace(dn)
    # tr(sigma_v sigma_w) = 2 delta_vw
    coeffs = 0.5 * np.einsum("vab,ba->v", PAULI, dn)
    return complex(alpha), coeffs.real.copy(), coeffs.imag.copy()


def rebuild_mode_matrix(alpha: complex, u: np.ndarray, v: np.ndarray, N: int) -> np.ndarray:
    return (alpha / N) * np.eye(2) + np.einsum("v,vab->ab", np.asarray(u) + 1j * np.asarray(v), PAULI)


def photonic_operator(dn: np.ndarray, space: SpinSpace) -> sp.csr_matrix:
    """
    Emitted-mode operator b^dag dn b on the ladder, vacuum part omitted.
    Only meaningful inside normally ordered expectation values.
    """
    return collective_operator(dn, build_spin_ops(space.N))


def commutator_check(dn: np.ndarray, state: CollectiveState, space: SpinSpace) -> float:
    """|<b^dag [dn, dn^dag] b>|, the term dropped when treating the mode as a boson."""
    dn = np.asarray(dn, dtype=complex)
    commutator = dn @ dn.conj().T - dn.conj().T @ dn
    if not np.any(commutator):
        return 0.0
    return abs(expectation(photonic_operator(commutator, space), state))


def mode_from_matrix(n: int, dn: np.ndarray, N: int) -> HarmonicMode:
    """Bind a mode matrix to an atom count; dn itself does not depend on N."""
    dn = np.asarray(dn, dtype=complex)
    alpha, u, v = pauli_decompose(dn, N)
    return HarmonicMode(n=n, dn=dn, alpha=alpha, u=u, v=v, N=N)


def build_mode(dipole: SpectralDipole, n: int, det: DetectorSpec, omega_d: float, N: int) -> HarmonicMode:
    return mode_from_matrix(n, build_mode_matrix(dipole, n, det, omega_d), N)


def build_modes(
    dipole: SpectralDipole, orders: Iterable[int], det: DetectorSpec, omega_d: float, N: int
) -> List[HarmonicMode]:
    modes = [build_mode(dipole, n, det, omega_d, N) for n in orders]
    for mode in modes:
        logger.debug("Harmonic %d: max|d_n| = %.3e", mode.n, np.abs(mode.dn).max())
    return modes
