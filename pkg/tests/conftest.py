import functools
from pathlib import Path

import pytest

from detforge.fcidump import parse_fcidump_file

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "detforge" / "data"


@functools.lru_cache(maxsize=None)
def load_fixture(name):
    return parse_fcidump_file(DATA_DIR / f"{name}.fcidump")


@pytest.fixture(scope="session")
def h2():
    return load_fixture("h2_sto3g")


@pytest.fixture(scope="session")
def h4():
    return load_fixture("h4_sto3g")


@pytest.fixture(scope="session")
def h2o():
    return load_fixture("h2o_sto3g")


@pytest.fixture(scope="session")
def n2_21():
    """N2/STO-3G frozen-core at 2.1 A: the (8,5,5) fixture."""
    return load_fixture("n2_sto3g_fc_2.1")
