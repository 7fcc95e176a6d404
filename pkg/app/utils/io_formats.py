# app/utils/io_formats.py
"""
Text tables and binary stage caches.

Text: UTF-8, tab-delimited, '#' header lines (title, then "name [unit]" columns), %.17g floats.
Binary: magic, format version, kind tag, JSON metadata, then arrays in .npy framing.
"""
import hashlib
import json
import struct
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from app.core.errors import CacheFormatError

MAGIC = b"HHGQCACH"
FORMAT_VERSION = (1, 0, 0)
FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# Text tables
# ---------------------------------------------------------------------------

def split_complex(df: pd.DataFrame) -> pd.DataFrame:
    """Replace every complex column c by re_c, im_c."""
    out = {}
    for col in df.columns:
        values = df[col].to_numpy()
        if np.iscomplexobj(values):
            out[f"re_{col}"] = values.real
            out[f"im_{col}"] = values.imag
        else:
            out[col] = values
    return pd.DataFrame(out)


def write_table(
    path: PathLike,
    df: pd.DataFrame,
    title: str,
    units: Optional[Mapping[str, str]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = split_complex(df)
    units = dict(units or {})
    header = []
    for col in df.columns:
        base = col[3:] if col.startswith(("re_", "im_")) else col
        unit = units.get(col, units.get(base))
        header.append(f"{col} [{unit}]" if unit else col)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {title}\n")
        fh.write("# " + "\t".join(header) + "\n")
        df.to_csv(fh, sep="\t", header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    columns = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            columns = [c.split(" [")[0] for c in line[1:].strip().split("\t")]
    return pd.read_csv(path, sep="\t", comment="#", header=None, names=columns)


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Binary caches
# ---------------------------------------------------------------------------

def _write_block(fh, payload: bytes) -> None:
    fh.write(struct.pack("<I", len(payload)))
    fh.write(payload)


def _read_block(fh) -> bytes:
    raw = fh.read(4)
    if len(raw) != 4:
        raise CacheFormatError("Truncated cache header.")
    (size,) = struct.unpack("<I", raw)
    payload = fh.read(size)
    if len(payload) != size:
        raise CacheFormatError("Truncated cache header.")
    return payload


def write_cache(path: PathLike, kind: str, meta: Mapping, arrays: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<3I", *FORMAT_VERSION))
        _write_block(fh, kind.encode("utf-8"))
        _write_block(fh, json.dumps(dict(meta), sort_keys=True).encode("utf-8"))
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            if arr.dtype == object:
                raise CacheFormatError(f"Array '{name}' has object dtype and cannot be cached.")
            _write_block(fh, name.encode("utf-8"))
            np.save(fh, np.ascontiguousarray(arr.astype(arr.dtype.newbyteorder("<"))), allow_pickle=False)
    return path


def read_cache(path: PathLike, kind: Optional[str] = None) -> Tuple[Dict, Dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CacheFormatError(f"{path} is not a stage cache file.")
        version = struct.unpack("<3I", fh.read(12))
        if version[:2] != FORMAT_VERSION[:2]:
            raise CacheFormatError(
                f"{path} has cache format {'.'.join(map(str, version))}, "
                f"reader supports {FORMAT_VERSION[0]}.{FORMAT_VERSION[1]}.x."
            )
        found = _read_block(fh).decode("utf-8")
        if kind is not None and found != kind:
            raise CacheFormatError(f"{path} holds '{found}' data, expected '{kind}'.")
        meta = json.loads(_read_block(fh).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            name = _read_block(fh).decode("utf-8")
            try:
                arrays[name] = np.load(fh, allow_pickle=False)
            except ValueError as exc:
                raise CacheFormatError(f"Corrupt array '{name}' in {path}: {exc}") from exc
    return meta, arrays
