# app/models/phase_space.py
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from app.core.errors import ArgumentError
from app.models.statistics import JointStatistics, PhotonStatistics, WignerGrid

# Per-quadrature standard deviation of the vacuum noise added to every trajectory.
VACUUM_STD = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class ThetaDistribution:
    """
    p(theta) ~ |sin theta| exp(-(theta - theta0)^2 / 2 sigma^2), sigma = a1 N^-a2.
    family="right" samples the "up" profile and rotates it onto +x.
    """
    family: str
    theta0: float
    sigma: float
    a1: float
    a2: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ArgumentError(f"Angular width must be positive, got sigma={self.sigma}.")

    def density(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.abs(np.sin(theta)) * np.exp(-0.5 * ((theta - self.theta0) / self.sigma) ** 2)

    def support(self):
        return max(0.0, self.theta0 - 6.0 * self.sigma), min(np.pi, self.theta0 + 6.0 * self.sigma)


@dataclass
class TrajectoryEnsemble:
    N: int
    S_points: np.ndarray
    seeds: Dict[str, int] = field(default_factory=dict)
    alpha_fields: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.S_points.ndim != 2 or self.S_points.shape[1] != 3 or self.S_points.shape[0] < 1:
            raise ArgumentError(f"Spin samples must have shape (R, 3) with R >= 1, got {self.S_points.shape}.")

    @property
    def R(self) -> int:
        return self.S_points.shape[0]

    def mean_spin(self) -> np.ndarray:
        return self.S_points.mean(axis=0)


@dataclass
class EnsembleSummary:
    """Ensemble estimates; *_se are batch-means standard errors."""
    R: int
    nbar: float
    nbar_se: float
    g2: float
    g2_se: float
    mandel_q: float
    mandel_q_se: float
    intensity: float
    intensity_se: float
    statistics: PhotonStatistics
    density: WignerGrid
    joint: Optional[JointStatistics] = None
    pearson_se: Optional[float] = None
