import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def say(capsys):
    """Print a line to the terminal even when output capture is on."""
    def _say(line):
        with capsys.disabled():
            print(line)
    return _say
