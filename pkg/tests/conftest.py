import random

import pytest

from stereoedit.catalog import build_catalog
from stereoedit.demo import build_demo_catalog
from stereoedit.pipeline import sample_scene


@pytest.fixture(scope="session")
def catalog_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("catalog")
    build_demo_catalog(root, seed=0)
    return root


@pytest.fixture(scope="session")
def catalog(catalog_root):
    return build_catalog(catalog_root)


@pytest.fixture
def make_scene(catalog):
    def _make(seed=0, k_min=2, k_max=5, duration=10.0):
        return sample_scene(catalog, random.Random(seed), k_min, k_max, duration)

    return _make
