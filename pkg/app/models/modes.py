# app/models/modes.py
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigurationError


@dataclass(frozen=True)
class DetectorSpec:
    domega: float
    dOmega: float = 4.0 * np.pi / 3.0

    def __post_init__(self):
        if self.domega <= 0:
            raise ConfigurationError(f"Frequency window must be positive, got domega={self.domega}.")
        if not 0 < self.dOmega <= 4.0 * np.pi:
            raise ConfigurationError(f"Solid angle must lie in (0, 4pi], got dOmega={self.dOmega}.")

    @classmethod
    def for_drive(cls, omega_d: float, window: float = 0.5, dOmega: float = 4.0 * np.pi / 3.0) -> "DetectorSpec":
        return cls(domega=window * omega_d, dOmega=dOmega)

    def check_window(self, omega_d: float) -> None:
        if self.domega > omega_d:
            raise ConfigurationError(
                f"Window domega={self.domega:.4g} exceeds the harmonic spacing omega_d={omega_d:.4g}."
            )


@dataclass(frozen=True)
class HarmonicMode:
    """
    Mode of the n-th harmonic: dn = (alpha/N) I + (u + i v) . sigma.
    """
    n: int
    dn: np.ndarray
    alpha: complex
    u: np.ndarray
    v: np.ndarray
    N: int

    def coherent_amplitude(self, direction: np.ndarray) -> complex:
        """Classical-limit amplitude for a product state along the unit vector `direction`."""
        return complex(self.alpha + self.N * np.dot(self.u + 1j * self.v, direction))

    def as_record(self) -> dict:
        d = self.dn
        return {
            "n": self.n,
            "re_d11": d[0, 0].real, "im_d11": d[0, 0].imag,
            "re_d12": d[0, 1].real, "im_d12": d[0, 1].imag,
            "re_d21": d[1, 0].real, "im_d21": d[1, 0].imag,
            "re_d22": d[1, 1].real, "im_d22": d[1, 1].imag,
            "re_alpha_per_N": (self.alpha / self.N).real,
            "im_alpha_per_N": (self.alpha / self.N).imag,
            "u_x": self.u[0], "u_y": self.u[1], "u_z": self.u[2],
            "v_x": self.v[0], "v_y": self.v[1], "v_z": self.v[2],
        }
