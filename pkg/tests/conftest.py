import pytest

from sawr.topology import build_chimera


@pytest.fixture(scope="session")
def c1():
    return build_chimera(1)


@pytest.fixture(scope="session")
def c2():
    return build_chimera(2)


@pytest.fixture(scope="session")
def c3():
    return build_chimera(3)
