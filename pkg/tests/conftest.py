from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from gptfar.domain import DomainConfig

REPO_ROOT = Path(__file__).resolve().parents[1]
TOY_CATALOG = REPO_ROOT / "fixtures" / "toy_catalog"
REPLAY_FIXTURES = REPO_ROOT / "fixtures" / "replay"


@pytest.fixture(scope="session")
def config() -> DomainConfig:
    return DomainConfig.default()


@pytest.fixture
def toy_catalog_root() -> Path:
    if not TOY_CATALOG.exists():
        pytest.skip("toy catalog fixtures not built (tools/build_toy_fixtures.py)")
    return TOY_CATALOG


@pytest.fixture
def replay_fixtures_dir() -> Path:
    if not REPLAY_FIXTURES.exists():
        pytest.skip("replay fixtures not built (tools/build_toy_fixtures.py)")
    return REPLAY_FIXTURES
