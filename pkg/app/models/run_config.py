# app/models/run_config.py
import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from app.config import settings
from app.core.errors import ConfigurationError
from app.models.atomic import GridSpec, SoftCoulombParams
from app.models.modes import DetectorSpec
from app.models.pulse import PropagationConfig, PulseSpec
from app.models.spin import SuperradianceParams, TwistingParams
from app.models.statistics import StatisticsPolicy
from app.utils.units import to_atomic_units


def _resolve_quantity(value: Any) -> Any:
    """Accept a bare number (atomic units) or {"value": x, "unit": tag}."""
    if isinstance(value, dict):
        if "value" not in value:
            raise ValueError(f"Quantity {value} has no 'value'.")
        return to_atomic_units(float(value["value"]), value.get("unit", "au"))
    return value


AtomicUnits = Annotated[float, BeforeValidator(_resolve_quantity)]

Protocol = Literal["ground", "pi", "pi2", "dicke-half", "twisting", "superradiance"]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AtomBlock(_Block):
    a: AtomicUnits = Field(0.816, gt=0)
    L: AtomicUnits = Field(150.0, gt=0)
    dx: AtomicUnits = Field(0.7, gt=0)
    cab: float = Field(5.0e-4, ge=0)

    def grid(self) -> GridSpec:
        return GridSpec.from_box(self.L, self.dx)

    def params(self) -> SoftCoulombParams:
        return SoftCoulombParams(a=self.a, cab=self.cab)


class PulseBlock(_Block):
    E0: AtomicUnits = Field(default_factory=lambda: to_atomic_units(60.0, "GV/m"), ge=0)
    omega_d: AtomicUnits = Field(default_factory=lambda: to_atomic_units(1.55, "eV"), gt=0)
    n_cycles: int = Field(40, ge=4)
    cep: float = 0.0
    steps_per_period: int = Field(400, ge=16)
    max_harmonic: int = Field(81, ge=1)

    def pulse(self) -> PulseSpec:
        return PulseSpec(E0=self.E0, omega_d=self.omega_d, n_cycles=self.n_cycles, cep=self.cep)

    def propagation(self) -> PropagationConfig:
        return PropagationConfig.for_pulse(self.pulse(), self.steps_per_period)


class PreparationBlock(_Block):
    protocol: Protocol = "ground"
    N: int = Field(62000, ge=1)
    omega0: AtomicUnits = Field(0.49, gt=0)
    omegaJ: AtomicUnits = Field(0.01, ge=0)
    # gamma defaults to gamma_N / N
    gamma: Optional[AtomicUnits] = None
    gamma_N: float = Field(0.1, gt=0)
    t_h: AtomicUnits = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _check_gamma(self):
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"Decay rate must be positive, got gamma={self.gamma}.")
        return self

    @property
    def decay_rate(self) -> float:
        return self.gamma if self.gamma is not None else self.gamma_N / self.N

    def twisting(self) -> TwistingParams:
        return TwistingParams(omega0=self.omega0, omegaJ=self.omegaJ, t_h=self.t_h)

    def superradiance(self) -> SuperradianceParams:
        return SuperradianceParams(gamma=self.decay_rate, t_h=self.t_h)


class DetectionBlock(_Block):
    harmonics: List[int] = Field(default_factory=lambda: [15, 21, 55])
    window: float = Field(0.5, gt=0, le=1.0)
    dOmega: float = Field(4.0 * np.pi / 3.0, gt=0, le=4.0 * np.pi)
    pairs: List[Tuple[int, int]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_orders(self):
        if not self.harmonics or any(n < 1 for n in self.harmonics):
            raise ValueError(f"Harmonic orders must be positive integers, got {self.harmonics}.")
        for a, b in self.pairs:
            if a not in self.harmonics or b not in self.harmonics:
                raise ValueError(f"Pair ({a}, {b}) uses a harmonic outside {self.harmonics}.")
        return self

    def detector(self, omega_d: float) -> DetectorSpec:
        return DetectorSpec.for_drive(omega_d, window=self.window, dOmega=self.dOmega)


class StatisticsBlock(_Block):
    m_max_start: int = Field(20, ge=2)
    m_max_step: int = Field(10, ge=1)
    m_max_cap: int = Field(80, ge=2)
    tolerance: float = Field(1e-3, gt=0)
    grid_points: int = Field(201, ge=3)
    negative_tolerance: float = Field(1e-6, ge=0)
    joint_order: int = Field(12, ge=1)

    @model_validator(mode="after")
    def _check_policy(self):
        if self.m_max_start > self.m_max_cap:
            raise ValueError(f"m_max_start={self.m_max_start} exceeds m_max_cap={self.m_max_cap}.")
        return self

    def policy(self) -> StatisticsPolicy:
        return StatisticsPolicy(
            m_max_start=self.m_max_start,
            m_max_step=self.m_max_step,
            m_max_cap=self.m_max_cap,
            tolerance=self.tolerance,
            grid_points=self.grid_points,
            negative_tolerance=self.negative_tolerance,
        )


class TwaBlock(_Block):
    enabled: bool = False
    R: int = Field(20000, ge=1)
    seed: Optional[int] = None
    family: Optional[Literal["up", "half", "down", "right"]] = None
    refit: bool = False
    vacuum_std: float = Field(1.0 / np.sqrt(2.0), ge=0)
    bins: int = Field(101, ge=3)
    # histogram smoothing width in bins
    smooth: Optional[float] = None


# Upstream blocks each stage's cache key depends on.
STAGE_BLOCKS: Dict[str, Tuple[str, ...]] = {
    "atom": ("atom",),
    "propagate": ("atom", "pulse"),
    "modes": ("atom", "pulse", "detection"),
    "prepare": ("preparation",),
    "stats": ("atom", "pulse", "detection", "preparation", "statistics"),
    "twa": ("atom", "pulse", "detection", "preparation", "twa", "seed"),
}


class RunConfig(_Block):
    atom: AtomBlock = Field(default_factory=AtomBlock)
    pulse: PulseBlock = Field(default_factory=PulseBlock)
    preparation: PreparationBlock = Field(default_factory=PreparationBlock)
    detection: DetectionBlock = Field(default_factory=DetectionBlock)
    statistics: StatisticsBlock = Field(default_factory=StatisticsBlock)
    twa: TwaBlock = Field(default_factory=TwaBlock)
    seed: int = Field(default_factory=lambda: settings.seed)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            first = exc.errors()[0]
            where = ".".join(str(p) for p in first["loc"]) or "config"
            raise ConfigurationError(f"Invalid run config at '{where}': {first['msg']}") from exc

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigurationError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def updated(self, **blocks: Dict[str, Any]) -> "RunConfig":
        """Copy with some block fields replaced, re-validated, e.g. updated(preparation={"N": 100})."""
        data = self.model_dump()
        for name, changes in blocks.items():
            if isinstance(data.get(name), dict):
                data[name].update(changes)
            else:
                data[name] = changes
        return RunConfig.from_dict(data)

    def stage_subset(self, stage: str) -> Dict[str, Any]:
        dump = self.model_dump(mode="json")
        return {name: dump[name] for name in STAGE_BLOCKS[stage]}

    def stage_key(self, stage: str) -> str:
        canonical = json.dumps(self.stage_subset(stage), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(f"{stage}:{canonical}".encode("utf-8")).hexdigest()

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
