# app/models/spin.py
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional

import numpy as np
import scipy.sparse as sp

from app.core.errors import ArgumentError

StateKind = Literal["pure", "diagonal"]


@dataclass(frozen=True)
class SpinSpace:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ArgumentError(f"Need at least one atom, got N={self.N}.")

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def sz_values(self) -> np.ndarray:
        """S_z eigenvalue 2k - N of ladder state |k> (k excited atoms)."""
        return 2.0 * np.arange(self.N + 1) - self.N


@dataclass(frozen=True)
class SpinOperators:
    space: SpinSpace
    sx: sp.csr_matrix
    sy: sp.csr_matrix
    sz: sp.csr_matrix
    splus: sp.csr_matrix
    sminus: sp.csr_matrix


@dataclass(frozen=True)
class CollectiveState:
    """
    Permutation-symmetric state of N atoms on the S_z ladder.
    kind="pure" stores amplitudes, kind="diagonal" stores ladder probabilities.
    """
    N: int
    kind: StateKind
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.N + 1,):
            raise ArgumentError(f"State vector has shape {self.data.shape}, expected ({self.N + 1},).")
        if self.kind == "pure":
            norm = float(np.vdot(self.data, self.data).real)
            if abs(norm - 1.0) > 1e-10:
                raise ArgumentError(f"Pure state is not normalized: |psi|^2 = {norm:.12f}.")
        elif self.kind == "diagonal":
            if np.any(self.data < 0):
                raise ArgumentError(f"Negative ladder probability {self.data.min():.3e}.")
            total = float(self.data.sum())
            if abs(total - 1.0) > 1e-9:
                raise ArgumentError(f"Ladder probabilities sum to {total:.12f}.")
        else:
            raise ArgumentError(f"Unknown state kind '{self.kind}'.")

    @classmethod
    def pure(cls, amplitudes: np.ndarray) -> "CollectiveState":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        return cls(N=amplitudes.shape[0] - 1, kind="pure", data=amplitudes)

    @classmethod
    def diagonal(cls, probabilities: np.ndarray) -> "CollectiveState":
        probabilities = np.asarray(probabilities, dtype=float)
        return cls(N=probabilities.shape[0] - 1, kind="diagonal", data=probabilities)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    @property
    def probabilities(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return self.data

    def density_matrix(self) -> np.ndarray:
        """Dense (N+1)x(N+1) density matrix; small N only."""
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.diag(self.data).astype(complex)


@dataclass(frozen=True)
class TwistingParams:
    omega0: float = 0.49
    omegaJ: float = 0.01
    t_h: float = 0.0

    def __post_init__(self):
        if self.t_h < 0:
            raise ArgumentError(f"Hold time must be non-negative, got t_h={self.t_h}.")


@dataclass(frozen=True)
class SuperradianceParams:
    gamma: float
    t_h: float
    dt_ode: Optional[float] = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ArgumentError(f"Decay rate must be positive, got gamma={self.gamma}.")
        if self.t_h < 0:
            raise ArgumentError(f"Hold time must be non-negative, got t_h={self.t_h}.")

    def peak_time(self, N: int) -> float:
        return float(np.log(N) / (4.0 * self.gamma * N))

    def step(self, N: int) -> float:
        if self.dt_ode is not None:
            return self.dt_ode
        candidates = [0.01 / (self.gamma * N), 1.0 / (self.gamma * N * (N + 2))]
        if self.t_h > 0:
            candidates.append(self.t_h / 1.0e4)
        return min(candidates)


@dataclass
class SuperradianceResult:
    state: CollectiveState
    times: np.ndarray
    magnetization: np.ndarray
    intensity: np.ndarray
    checkpoints: Dict[float, CollectiveState] = field(default_factory=dict)
