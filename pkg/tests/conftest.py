import numpy as np
import pytest

from src.utils import OUTPUT_DIR_ENV


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def no_output_dir_override(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
