import pytest

from prodone import make_group


@pytest.fixture(scope="session")
def ctx372():
    return make_group("3,7,2")


@pytest.fixture(scope="session")
def ctx3133():
    return make_group("3,13,3")


@pytest.fixture(scope="session")
def ctx5113():
    return make_group("5,11,3")
