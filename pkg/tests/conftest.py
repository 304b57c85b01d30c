from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from holoraft.doc_metric import load_or_build_tables
from holoraft.geometry import ModuleGeometry, build_regions

settings.register_profile(
    "ci", derandomize=True, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

# Table builds take ~30 s; cache them across sessions next to the tests.
CACHE_DIR = Path(__file__).parent / ".cache" / "tables"


@pytest.fixture(scope="session")
def geom() -> ModuleGeometry:
    return ModuleGeometry()


@pytest.fixture(scope="session")
def regions(geom):
    return build_regions(geom, 0.1)


@pytest.fixture(scope="session")
def tables(geom, regions):
    return load_or_build_tables(CACHE_DIR, geom, 0.1, regions)
