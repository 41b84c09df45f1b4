import pytest

from hanoilab.toh import build_state_graph


@pytest.fixture(scope="session")
def graph4():
    return build_state_graph(4)


@pytest.fixture(scope="session")
def graph5():
    return build_state_graph(5)
