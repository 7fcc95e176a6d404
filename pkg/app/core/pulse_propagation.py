# app/core/pulse_propagation.py
import logging
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from app.core.collective_spin import bilinear_coefficients, build_spin_ops, operator_gram
from app.core.errors import ArgumentError, PropagationError
from app.models.atomic import AtomicSpectrum
from app.models.pulse import DynamicalMatrixSeries, PropagationConfig, PulseSpec, SpectralDipole
from app.models.spin import CollectiveState
from app.utils.units import SPEED_OF_LIGHT_AU

logger = logging.getLogger(__name__)


def classical_field(t: Union[float, np.ndarray], pulse: PulseSpec) -> Union[float, np.ndarray]:
    t = np.asarray(t, dtype=float)
    ramp = pulse.t_f / 4.0
    envelope = np.clip(np.minimum(np.minimum(t / ramp, 1.0), (pulse.t_f - t) / ramp), 0.0, 1.0)
    value = envelope * pulse.E0 * np.cos(pulse.omega_d * t + pulse.cep)
    return float(value) if value.ndim == 0 else value


def evolution_steps(
    spectrum: AtomicSpectrum,
    pulse: PulseSpec,
    cfg: PropagationConfig,
    columns: Optional[int] = 2,
) -> Iterator[Tuple[int, float, np.ndarray]]:
    """
    Yield (step, t, F[:, :columns]) from t = 0 to t_f.

    Each step applies exp(-i (W - E_c(t + dt/2) D) dt). Only the leading columns of F are
    carried; columns=None tracks the full matrix.
    """
    M = spectrum.M
    width = M if columns is None else columns
    energies = spectrum.energies
    D = spectrum.D
    F = np.eye(M, width, dtype=complex)
    dt = cfg.dt
    yield 0, 0.0, F

    free_step = np.exp(-1j * energies * dt)
    for step in range(1, cfg.n_steps + 1):
        field = classical_field((step - 0.5) * dt, pulse)
        if field == 0.0:
            F = free_step[:, None] * F
        else:
            U = scipy.linalg.expm(-1j * dt * (np.diag(energies) - field * D))
            F = U @ F
        if not np.all(np.isfinite(F)):
            raise PropagationError(f"Non-finite evolution matrix at step {step} (t={step * dt:.6g}).", step=step)
        yield step, step * dt, F


def _compress(F2: np.ndarray, O: np.ndarray) -> np.ndarray:
    """Top-left 2x2 block of F^dag O F, from the first two columns of F."""
    return F2.conj().T @ O @ F2


def propagate(
    spectrum: AtomicSpectrum,
    pulse: PulseSpec,
    cfg: PropagationConfig,
    observables: Optional[Sequence[np.ndarray]] = None,
    on_progress: Optional[Callable[[int, int], None]] = None,
) -> List[DynamicalMatrixSeries]:
    """
    Propagate under the classical drive and return one 2x2 dynamical-matrix series per
    observable (defaults to the dipole D). The full F history is never stored.

    on_progress:
        Optional callback called as on_progress(step, total_steps).
    """
    observables = list(observables) if observables is not None else [spectrum.D]
    for O in observables:
        if O.shape != (spectrum.M, spectrum.M):
            raise ArgumentError(f"Observable has shape {O.shape}, expected ({spectrum.M}, {spectrum.M}).")
    n_times = cfg.n_steps + 1
    times = np.empty(n_times)
    values = [np.empty((n_times, 2, 2), dtype=complex) for _ in observables]
    report_every = max(1, cfg.n_steps // 100)

    for step, t, F in evolution_steps(spectrum, pulse, cfg, columns=2):
        times[step] = t
        for series, O in zip(values, observables):
            series[step] = _compress(F, O)
        if on_progress is not None and (step % report_every == 0 or step == cfg.n_steps):
            on_progress(step, cfg.n_steps)

    logger.info("Propagated %d steps of dt=%.4g over t_f=%.4g", cfg.n_steps, cfg.dt, cfg.t_f)
    return [DynamicalMatrixSeries(times=times, values=v) for v in values]


def spectral_dipole(
    series: DynamicalMatrixSeries, omegas: np.ndarray, chunk: int = 256
) -> SpectralDipole:
    """One-sided transform: trapezoidal integral of e^{i w t} d(t) over the sampled window."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    times = series.times
    if times.size < 2:
        raise ArgumentError("Spectral transform needs at least two samples.")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0.0):
        raise ArgumentError("Series must be uniformly sampled for the trapezoidal transform.")

    weights = np.full(times.size, dt)
    weights[0] = weights[-1] = 0.5 * dt
    flat = (weights[:, None] * series.values.reshape(times.size, 4))
    out = np.empty((omegas.size, 4), dtype=complex)
    for start in range(0, omegas.size, chunk):
        block = omegas[start:start + chunk]
        out[start:start + chunk] = np.exp(1j * np.outer(block, times)) @ flat
    return SpectralDipole(frequencies=omegas, values=out.reshape(omegas.size, 2, 2))


def harmonic_axis(omega_d: float, max_order: int, samples_per_harmonic: int = 20) -> np.ndarray:
    """Frequency grid up to max_order * omega_d that contains every exact harmonic."""
    n = max_order * samples_per_harmonic
    return omega_d * np.arange(1, n + 1) / samples_per_harmonic


def emission_spectrum(
    dipole: SpectralDipole,
    state: CollectiveState,
    N: int,
    omegas: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    d(eps)/d(omega) = (2/3) omega^4 / (pi c^3) <A^dag A>, A = b^dag d(omega) b.
    The expectation is a quadratic form in the (1, S_z, S+, S-) coefficients.
    """
    if omegas is not None and not np.array_equal(np.asarray(omegas), dipole.frequencies):
        raise ArgumentError("Requested frequencies differ from the sampled spectral dipole.")
    if state.N != N:
        raise ArgumentError(f"State describes N={state.N} atoms, spectrum requested for N={N}.")

    ops = build_spin_ops(N)
    identity = sp.identity(N + 1, dtype=complex, format="csr")
    basis = [identity, ops.sz, ops.splus, ops.sminus]
    gram = operator_gram(state, basis)

    coeffs = np.stack([bilinear_coefficients(d, N) for d in dipole.values])
    expectation = np.einsum("wi,ij,wj->w", coeffs.conj(), gram, coeffs).real
    omega = dipole.frequencies
    return (2.0 / 3.0) * omega ** 4 / (np.pi * SPEED_OF_LIGHT_AU ** 3) * expectation
