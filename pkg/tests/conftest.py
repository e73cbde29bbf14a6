import os
from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from mmsvm.dataio import Dataset
from mmsvm.main import app
from tests.utils.utils import synthetic_dataset, write_libsvm

A1A_ENV = "MMSVM_A1A_PATH"


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if os.environ.get(A1A_ENV):
        return
    skip = pytest.mark.skip(reason=f"set {A1A_ENV} to the a1a LIBSVM file")
    for item in items:
        if "a1a" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture(scope="module")
def client() -> Generator[TestClient, None, None]:
    with TestClient(app) as c:
        yield c


@pytest.fixture
def dataset() -> Dataset:
    return synthetic_dataset(seed=7)


@pytest.fixture
def dataset_path(tmp_path: Path, dataset: Dataset) -> Path:
    return write_libsvm(tmp_path / "synthetic.libsvm", dataset)


@pytest.fixture(scope="session")
def a1a_path() -> Path:
    return Path(os.environ[A1A_ENV])
