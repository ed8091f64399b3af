import pytest

from helpers import FIXTURES


@pytest.fixture
def fixtures():
    return FIXTURES
