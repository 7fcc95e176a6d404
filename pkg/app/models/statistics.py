# app/models/statistics.py
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.core.errors import ArgumentError


@dataclass(frozen=True)
class MomentTable:
    """
    values[m, l] = <a^dag^m a^l> for the operator a - shift.
    A table with shift != 0 holds moments of the centered operator.
    """
    values: np.ndarray
    shift: complex = 0j

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ArgumentError(f"Moment table must be square, got shape {v.shape}.")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("Moment table contains non-finite entries.")
        if abs(v[0, 0] - 1.0) > 1e-8:
            raise ArgumentError(f"Moment table is not normalized: <1> = {v[0, 0]}.")

    @property
    def m_max(self) -> int:
        return self.values.shape[0] - 1

    def truncated(self, m_max: int) -> "MomentTable":
        if m_max > self.m_max:
            raise ArgumentError(f"Cannot extend a table of order {self.m_max} to {m_max}.")
        return MomentTable(values=self.values[:m_max + 1, :m_max + 1].copy(), shift=self.shift)

    @classmethod
    def coherent(cls, beta: complex, m_max: int) -> "MomentTable":
        powers = beta ** np.arange(m_max + 1)
        return cls(values=np.outer(powers.conj(), powers))

    @classmethod
    def fock(cls, n: int, m_max: int) -> "MomentTable":
        """Number state |n>: <a^dag^m a^m> = n!/(n-m)! for m <= n, off-diagonals vanish."""
        diag = np.zeros(m_max + 1)
        running = 1.0
        for m in range(m_max + 1):
            if m > n:
                break
            diag[m] = running
            running *= n - m
        return cls(values=np.diag(diag).astype(complex))

    @classmethod
    def thermal(cls, nbar: float, m_max: int) -> "MomentTable":
        m = np.arange(m_max + 1)
        factorials = np.cumprod(np.concatenate([[1.0], m[1:].astype(float)]))
        return cls(values=np.diag(factorials * nbar ** m).astype(complex))


@dataclass(frozen=True)
class WignerGridSpec:
    center: complex
    half_width: float
    n_points: int = 201

    def __post_init__(self):
        if self.half_width <= 0 or self.n_points < 3:
            raise ArgumentError(
                f"Wigner grid needs half_width > 0 and n_points >= 3, got {self.half_width}, {self.n_points}."
            )

    def axes(self):
        re = np.linspace(self.center.real - self.half_width, self.center.real + self.half_width, self.n_points)
        im = np.linspace(self.center.imag - self.half_width, self.center.imag + self.half_width, self.n_points)
        return re, im


@dataclass(frozen=True)
class WignerGrid:
    """W sampled on physical alpha; values[i, j] at (re[j], im[i])."""
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray
    shift: complex = 0j

    @property
    def dA(self) -> float:
        return float((self.re[1] - self.re[0]) * (self.im[1] - self.im[0]))

    @property
    def alpha(self) -> np.ndarray:
        return self.re[None, :] + 1j * self.im[:, None]

    def norm(self) -> float:
        return float(self.values.sum() * self.dA)


@dataclass(frozen=True)
class PhotonStatistics:
    p: np.ndarray
    cancellation: Optional[float] = None
    authoritative: bool = True
    clipped_mass: float = 0.0

    @property
    def total(self) -> float:
        return float(self.p.sum())

    @property
    def mean(self) -> float:
        return float(np.arange(self.p.size) @ self.p)

    @property
    def variance(self) -> float:
        n = np.arange(self.p.size)
        return float((n ** 2) @ self.p - self.mean ** 2)


@dataclass(frozen=True)
class JointStatistics:
    p: np.ndarray
    pearson: float
    mutual_information: float

    @property
    def marginal_first(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def marginal_second(self) -> np.ndarray:
        return self.p.sum(axis=0)


@dataclass(frozen=True)
class StatisticsPolicy:
    m_max_start: int = 20
    m_max_step: int = 10
    m_max_cap: int = 80
    tolerance: float = 1e-3
    grid_points: int = 201
    negative_tolerance: float = 1e-6


@dataclass
class ModeReconstruction:
    moments: MomentTable
    wigner: WignerGrid
    statistics: PhotonStatistics
    nbar: float
    g2: float
    mandel_q: float
    m_max: int
    converged: bool
    statistics_from_moments: Optional[PhotonStatistics] = None
    notes: list = field(default_factory=list)
