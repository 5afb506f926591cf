import pytest

from stand_ins import source_set


@pytest.fixture(scope="session")
def sources():
    return source_set()
