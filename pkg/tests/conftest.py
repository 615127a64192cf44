import pytest

from cellwear import bundled_cell


@pytest.fixture(scope="session")
def nmc111():
    return bundled_cell("nmc111")


@pytest.fixture(scope="session")
def nmc622_25c():
    return bundled_cell("nmc622_25c")


@pytest.fixture(scope="session")
def nmc622_45c():
    return bundled_cell("nmc622_45c")
