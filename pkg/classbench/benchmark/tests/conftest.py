import os
from pathlib import Path

import pytest
from django.conf import settings

from classbench.benchmark.logic.catalogue import dataset_path, load_catalogued
from classbench.benchmark.tests.common import gaussian_blobs


@pytest.fixture
def current_path():
    path = Path(__file__).parent
    yield path


@pytest.fixture
def uci_dataset():
    """Loads a catalogued dataset, skips the test when it was not fetched into DATA_DIR."""

    def load(name):
        if not os.path.exists(dataset_path(name)):
            pytest.skip(f"{name} not fetched into {settings.DATA_DIR}, run: classbench fetch_datasets")
        return load_catalogued(name)

    return load


@pytest.fixture
def blobs():
    return gaussian_blobs()
