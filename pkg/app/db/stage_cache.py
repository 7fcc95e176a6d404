# app/db/stage_cache.py
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import duckdb
import numpy as np
import pandas as pd
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from app.config import settings
from app.core.errors import CacheFormatError
from app.utils.io_formats import file_sha256, read_cache, write_cache

logger = logging.getLogger(__name__)

INDEX_SCHEMA = """
CREATE TABLE IF NOT EXISTS artifacts (
    key VARCHAR,
    stage VARCHAR,
    path VARCHAR,
    sha256 VARCHAR,
    nbytes BIGINT,
    created_at TIMESTAMP,
    PRIMARY KEY (stage, key)
);
"""


@retry(
    retry=retry_if_exception_type(duckdb.IOException),
    stop=stop_after_attempt(6),
    wait=wait_exponential(multiplier=0.1, max=2.0),
    reraise=True,
)
def get_connection(db_path: Union[str, Path], read_only: bool = False) -> duckdb.DuckDBPyConnection:
    """
    Open the cache index. Retries while another process holds the duckdb file lock.
    """
    return duckdb.connect(database=str(db_path), read_only=read_only)


class StageCache:
    """
    Content-addressed stage artifacts under `root`, indexed in a duckdb table.
    A hit re-verifies the artifact checksum; a mismatch counts as a miss.
    """

    def __init__(self, root: Optional[Union[str, Path]] = None, index_name: Optional[str] = None):
        self.root = Path(root or settings.cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / (index_name or settings.cache_index)
        conn = get_connection(self.index_path)
        try:
            conn.execute(INDEX_SCHEMA)
        finally:
            conn.close()

    def path_for(self, stage: str, key: str) -> Path:
        return self.root / stage / f"{key}.bin"

    def _lookup(self, stage: str, key: str) -> Optional[Tuple[str, str]]:
        conn = get_connection(self.index_path)
        try:
            row = conn.execute(
                "SELECT path, sha256 FROM artifacts WHERE stage = ? AND key = ?", [stage, key]
            ).fetchone()
        finally:
            conn.close()
        return row

    def get(self, stage: str, key: str) -> Optional[Tuple[Dict, Dict[str, np.ndarray]]]:
        row = self._lookup(stage, key)
        if row is None:
            logger.info("Cache miss: %s %s", stage, key[:12])
            return None
        path, expected = row
        if not Path(path).exists() or file_sha256(path) != expected:
            logger.warning("Cache entry %s %s failed verification; recomputing", stage, key[:12])
            return None
        try:
            meta, arrays = read_cache(path, kind=stage)
        except CacheFormatError as exc:
            logger.warning("Cache entry %s %s unreadable (%s); recomputing", stage, key[:12], exc)
            return None
        logger.info("Cache hit: %s %s", stage, key[:12])
        return meta, arrays

    def put(self, stage: str, key: str, meta: Mapping, arrays: Mapping[str, np.ndarray]) -> Path:
        target = self.path_for(stage, key)
        partial = target.with_suffix(".partial")
        write_cache(partial, stage, meta, arrays)
        os.replace(partial, target)
        digest = file_sha256(target)
        conn = get_connection(self.index_path)
        try:
            conn.execute(
                "INSERT OR REPLACE INTO artifacts VALUES (?, ?, ?, ?, ?, ?)",
                [key, stage, str(target), digest, target.stat().st_size, datetime.now(timezone.utc).replace(tzinfo=None)],
            )
        finally:
            conn.close()
        logger.debug("Cached %s %s (%d bytes)", stage, key[:12], target.stat().st_size)
        return target

    def entries(self) -> pd.DataFrame:
        conn = get_connection(self.index_path, read_only=False)
        try:
            return conn.execute(
                "SELECT stage, key, nbytes, created_at, path FROM artifacts ORDER BY created_at"
            ).df()
        finally:
            conn.close()
