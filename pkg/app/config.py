# app/config.py
from dataclasses import dataclass
import os
from dotenv import load_dotenv

# Load .env from project root
load_dotenv()

ENV_PREFIX = "HHG_"


def _env(name: str, default: str) -> str:
    return os.getenv(f"{ENV_PREFIX}{name}", default)


@dataclass
class Settings:
    cache_dir: str = _env("CACHE_DIR", ".hhg_cache")
    cache_index: str = _env("CACHE_INDEX", "index.duckdb")
    output_dir: str = _env("OUTPUT_DIR", "runs")
    seed: int = int(_env("SEED", "20240601"))
    threads: int = int(_env("THREADS", "1"))
    log_level: str = _env("LOG_LEVEL", "INFO")
    # Bloch-sphere Wigner refuses larger ensembles; use the phase-space module there
    wigner_overflow_n: int = int(_env("WIGNER_OVERFLOW_N", "400"))


settings = Settings()
