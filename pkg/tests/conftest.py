import pytest
from hypothesis import HealthCheck, settings

from vapp.forge import ground_truth

settings.register_profile("vapp", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vapp")


@pytest.fixture(scope="session")
def gt():
    return ground_truth(1, 12)


@pytest.fixture(scope="session")
def fixtures_root(tmp_path_factory):
    return tmp_path_factory.mktemp("fixtures")
