import sys
from pathlib import Path

import pytest

from coopfilter.model import ModelParams

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


@pytest.fixture
def params():
    return ModelParams.default()


@pytest.fixture
def fixtures_dir():
    return FIXTURES
