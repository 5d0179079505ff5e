import numpy as np
import pytest

from config import settings
from qec.code import build_toric


@pytest.fixture
def code3():
    return build_toric(3, 3)


@pytest.fixture
def code2():
    return build_toric(2, 3)


@pytest.fixture
def code2d():
    return build_toric(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tmp_db(tmp_path, monkeypatch):
    """Point the run registry at a throwaway sqlite file."""
    import db

    monkeypatch.setattr(settings, "db_path", str(tmp_path / "runs.db"))
    db.init_db()
    return tmp_path / "runs.db"
