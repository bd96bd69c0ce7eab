import pytest

from paoi_relay.config_manager import default_scenario
from paoi_relay.experiments import straight_baseline


@pytest.fixture
def scenario():
    return default_scenario()


@pytest.fixture
def straight(scenario):
    return straight_baseline(scenario)


@pytest.fixture
def small_scenario(scenario):
    """three packets on the reference geometry; fast enough for full solves."""
    return scenario.replace(n_packets=3)
