import pytest

from fsfm import PolicyConfig

#: Fixed logical "now" so no test depends on wall-clock time (ms since epoch).
NOW_MS = 1_760_000_000_000


@pytest.fixture
def now_ms() -> int:
    return NOW_MS


@pytest.fixture
def config() -> PolicyConfig:
    return PolicyConfig(capacity=1000)
