# app/models/run_log.py
from dataclasses import dataclass
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


@dataclass
class StageRecord:
    name: str
    key: str
    cache_hit: bool
    duration_seconds: float
    error: Optional[str] = None
    outputs: Optional[List[str]] = None


class OutputFile(BaseModel):
    path: str
    sha256: str
    nbytes: int


class RunManifest(BaseModel):
    version: str
    config_hash: str
    config: Dict
    seeds: Dict[str, int] = Field(default_factory=dict)
    codata: Dict[str, float] = Field(default_factory=dict)
    stages: List[StageRecord] = Field(default_factory=list)
    outputs: List[OutputFile] = Field(default_factory=list)
    completed: bool = False

    @property
    def recomputed(self) -> List[str]:
        return [s.name for s in self.stages if not s.cache_hit and s.error is None]
