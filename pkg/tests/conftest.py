import os

import pytest
from hypothesis import HealthCheck, settings

from sfc_reconfig.scenarios import generate_scenario, initial_state, micro_fixture

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def micro():
    return micro_fixture()


@pytest.fixture(scope="session")
def small():
    inst = generate_scenario("small", 0)
    return inst, initial_state(inst)
