import pytest

from reachability import explore
from system_model import make_keys
from systems import get_system


@pytest.fixture(scope="session")
def bakery_impl():
    return get_system("bakery-impl")


@pytest.fixture(scope="session")
def bakery_spec():
    return get_system("bakery-spec")


@pytest.fixture(scope="session")
def relay():
    return get_system("relay")


@pytest.fixture(scope="session")
def bakery_graph_2(bakery_impl):
    """Complete canonical state graph of the 2-key Bakery implementation."""
    return explore(bakery_impl, make_keys(2), use_canon=True, state_cap=200_000)


@pytest.fixture(scope="session")
def bakery_graph_3(bakery_impl):
    """Complete canonical exploration of the 3-key Bakery implementation."""
    return explore(bakery_impl, make_keys(3), use_canon=True, state_cap=300_000)
