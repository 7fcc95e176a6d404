# app/models/pulse.py
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.errors import ArgumentError, ConfigurationError


@dataclass(frozen=True)
class PulseSpec:
    """Trapezoidal drive: quarter-length linear ramps around a flat top, cosine carrier."""
    E0: float
    omega_d: float
    n_cycles: int
    cep: float = 0.0

    def __post_init__(self):
        if self.E0 < 0:
            raise ConfigurationError(f"Peak field must be non-negative, got E0={self.E0}.")
        if self.omega_d <= 0:
            raise ConfigurationError(f"Drive frequency must be positive, got omega_d={self.omega_d}.")
        if self.n_cycles < 4:
            raise ConfigurationError(f"Need at least 4 cycles for the ramps, got n_cycles={self.n_cycles}.")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega_d

    @property
    def t_f(self) -> float:
        return self.n_cycles * self.period

    @property
    def ponderomotive_energy(self) -> float:
        return self.E0 ** 2 / (4.0 * self.omega_d ** 2)

    def cutoff_harmonic(self, ionization_potential: float) -> int:
        return int(round((ionization_potential + 3.17 * self.ponderomotive_energy) / self.omega_d))


@dataclass(frozen=True)
class PropagationConfig:
    dt: float
    t_f: float

    def __post_init__(self):
        if self.dt <= 0 or self.t_f <= 0:
            raise ConfigurationError(f"Need dt > 0 and t_f > 0, got dt={self.dt}, t_f={self.t_f}.")

    @classmethod
    def for_pulse(cls, pulse: PulseSpec, steps_per_period: int = 400) -> "PropagationConfig":
        n_steps = pulse.n_cycles * steps_per_period
        return cls(dt=pulse.t_f / n_steps, t_f=pulse.t_f)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_f / self.dt))


@dataclass(frozen=True)
class DynamicalMatrixSeries:
    times: np.ndarray
    values: np.ndarray  # (n_times, 2, 2)

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[1:] != (2, 2):
            raise ArgumentError(f"Series values must have shape (n, 2, 2), got {self.values.shape}.")
        if self.times.shape[0] != self.values.shape[0]:
            raise ArgumentError("Series times and values differ in length.")

    def __add__(self, other: "DynamicalMatrixSeries") -> "DynamicalMatrixSeries":
        if not np.array_equal(self.times, other.times):
            raise ArgumentError("Cannot add series sampled on different times.")
        return DynamicalMatrixSeries(times=self.times, values=self.values + other.values)

    @property
    def dt(self) -> Optional[float]:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else None


@dataclass(frozen=True)
class SpectralDipole:
    frequencies: np.ndarray
    values: np.ndarray  # (n_freq, 2, 2)

    def at(self, omega: float, rtol: float = 1e-9) -> np.ndarray:
        hits = np.flatnonzero(np.isclose(self.frequencies, omega, rtol=rtol, atol=0.0))
        if hits.size == 0:
            raise ArgumentError(
                f"Frequency {omega:.6g} is not on the sampled grid "
                f"[{self.frequencies.min():.6g}, {self.frequencies.max():.6g}]."
            )
        return self.values[hits[0]]
