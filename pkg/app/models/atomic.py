# app/models/atomic.py
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from app.core.errors import ConfigurationError


@dataclass(frozen=True)
class GridSpec:
    L: float
    dx: float
    x0: float
    M: int

    @classmethod
    def from_box(cls, L: float = 150.0, dx: float = 0.7, x0: Optional[float] = None) -> "GridSpec":
        if L <= 0 or dx <= 0:
            raise ConfigurationError(f"Grid needs L > 0 and dx > 0, got L={L}, dx={dx}.")
        M = int(round(2.0 * L / dx))
        if M < 3:
            raise ConfigurationError(f"Grid too coarse: M = round(2L/dx) = {M} < 3.")
        return cls(L=float(L), dx=float(dx), x0=0.9 * L if x0 is None else float(x0), M=M)

    @property
    def points(self) -> np.ndarray:
        """Grid positions, centered on x = 0 with spacing exactly dx."""
        return (np.arange(self.M) - (self.M - 1) / 2.0) * self.dx


@dataclass(frozen=True)
class SoftCoulombParams:
    a: float = 0.816
    cab: float = 5.0e-4

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError(f"Softening parameter must be positive, got a={self.a}.")
        if self.cab < 0:
            raise ConfigurationError(f"Absorber strength must be non-negative, got cab={self.cab}.")


@dataclass(frozen=True)
class GridCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs < self.rhs

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class GridReport:
    checks: List[GridCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[GridCheck]:
        return [c for c in self.checks if not c.passed]

    def raise_for_failure(self) -> None:
        bad = self.failures()
        if bad:
            detail = "; ".join(f"{c.name}: {c.lhs:.6g} !< {c.rhs:.6g}" for c in bad)
            raise ConfigurationError(f"Grid violates {detail}")


@dataclass(frozen=True)
class AtomicSpectrum:
    """
    Eigen-decomposition of the discretized atom.

    energies: complex eigenvalues, ascending real part (ties by imaginary part)
    states:   c-normalized eigenvectors as columns, sampled on the grid
    D:        dipole matrix in the eigenbasis
    """
    grid: GridSpec
    energies: np.ndarray
    states: np.ndarray
    D: np.ndarray

    @property
    def W(self) -> np.ndarray:
        return np.diag(self.energies)

    @property
    def M(self) -> int:
        return self.energies.shape[0]

    @property
    def ionization_potential(self) -> float:
        return float(-self.energies[0].real)

    @property
    def bound_count(self) -> int:
        return int(np.count_nonzero(self.energies.real < 0))

    def bound_width(self, below: float = 0.0) -> float:
        """Largest |Im w| among levels with Re w < below; 0 when there are none."""
        mask = self.energies.real < below
        return float(np.abs(self.energies[mask].imag).max()) if mask.any() else 0.0
