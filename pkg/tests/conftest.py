# tests/conftest.py
import os
import sys

import pytest

# Project root: the folder that contains 'app' and 'tests'
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)

from app.models.atomic import GridSpec, SoftCoulombParams  # noqa: E402


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec.from_box(L=20.0, dx=0.5)


@pytest.fixture
def atom_params() -> SoftCoulombParams:
    return SoftCoulombParams(a=0.816, cab=0.0)
