import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ctx5():
    from rmsingular.padic import PrimeContext

    return PrimeContext(5, 8)
