from pathlib import Path

import numpy as np
import pytest

from affmatch import _kernels
from affmatch.config import default_geo_path, default_match_config_path, default_registry_path
from affmatch.matcher import MatchConfig
from affmatch.percolator import CriterionIndex, QueryKind
from affmatch.registry import REGISTRY_KINDS, GeoMapping, build_index_set, load_registry

DATA = Path(default_geo_path()).parent


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the numba kernel once so timing-sensitive tests measure matching only
    idx = CriterionIndex("warmup")
    idx.add("a b", {"x"}, QueryKind.PHRASE)
    idx.add("a c", {"y"}, QueryKind.BAG)
    for backend in _kernels.BACKENDS:
        idx.percolate("a b c", backend=backend)


@pytest.fixture(scope="session")
def geo():
    return GeoMapping.load(default_geo_path())


@pytest.fixture(scope="session")
def entries():
    return {k: load_registry(default_registry_path(k), k) for k in REGISTRY_KINDS}


@pytest.fixture(scope="session")
def index_sets(entries, geo):
    return {k: build_index_set(k, entries[k], geo) for k in REGISTRY_KINDS}


@pytest.fixture(scope="session")
def configs():
    return {k: MatchConfig.load(default_match_config_path(k)) for k in REGISTRY_KINDS}


@pytest.fixture
def rng():
    return np.random.default_rng(20210401)
