import struct

import numpy as np
import pandas as pd
import pytest

from app.core.errors import CacheFormatError
from app.utils.io_formats import MAGIC, file_sha256, read_cache, read_table, write_cache, write_table


def test_table_header_and_complex_columns(tmp_path):
    df = pd.DataFrame({"t": [0.0, 0.5], "d": [1 + 2j, 0.1 - 0.3j]})
    path = write_table(tmp_path / "series.tsv", df, "dipole series", {"t": "au"})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# dipole series"
    assert lines[1] == "# t [au]\tre_d\tim_d"
    assert lines[3].split("\t") == ["0.5", "0.10000000000000001", "-0.29999999999999999"]

    back = read_table(path)
    assert list(back.columns) == ["t", "re_d", "im_d"]
    assert np.array_equal(back["im_d"].to_numpy(), np.array([2.0, -0.3]))


def test_identical_tables_are_byte_identical(tmp_path):
    df = pd.DataFrame({"x": np.linspace(0.0, 1.0, 7) / 3.0})
    a = write_table(tmp_path / "a.tsv", df, "x")
    b = write_table(tmp_path / "b.tsv", df, "x")
    assert file_sha256(a) == file_sha256(b)


def test_cache_keeps_arrays_and_metadata(tmp_path):
    arrays = {"energies": np.array([-0.79 + 0j, -0.2 - 1e-4j]), "M": np.arange(3, dtype=np.int64)}
    path = write_cache(tmp_path / "atom.bin", "atom", {"M": 3, "label": "x"}, arrays)
    assert path.read_bytes()[:8] == MAGIC
    meta, back = read_cache(path, kind="atom")
    assert meta == {"M": 3, "label": "x"}
    assert np.array_equal(back["energies"], arrays["energies"])
    assert back["M"].dtype == np.int64


def test_cache_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTACACHE-------")
    with pytest.raises(CacheFormatError):
        read_cache(path)


def test_cache_rejects_other_versions_and_kinds(tmp_path):
    path = write_cache(tmp_path / "modes.bin", "modes", {}, {"dn": np.zeros((1, 2, 2))})
    with pytest.raises(CacheFormatError):
        read_cache(path, kind="atom")

    raw = bytearray(path.read_bytes())
    raw[8:20] = struct.pack("<3I", 2, 0, 0)
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheFormatError):
        read_cache(path)


def test_object_arrays_cannot_be_cached(tmp_path):
    with pytest.raises(CacheFormatError):
        write_cache(tmp_path / "bad.bin", "atom", {}, {"x": np.array([{"a": 1}], dtype=object)})
