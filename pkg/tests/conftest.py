from pathlib import Path

import pytest
from loguru import logger

ROOT = Path(__file__).parent.parent


@pytest.fixture
def scenarios_dir() -> Path:
    return ROOT / 'scenarios'


@pytest.fixture
def specs_dir() -> Path:
    return ROOT / 'specs'


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep runs away from a developer's .env and out/ directory."""
    monkeypatch.chdir(tmp_path)
    for key in ('ANONET_OUT_DIR', 'ANONET_MAX_ROUNDS', 'ANONET_COVERAGE_BOUND', 'ANONET_LOG_FILE'):
        monkeypatch.delenv(key, raising=False)


@pytest.fixture
def warnings_logged():
    """Messages logged at WARNING or above while the test runs."""
    messages = []
    handler = logger.add(lambda message: messages.append(message.record['message']), level='WARNING')
    yield messages
    logger.remove(handler)
