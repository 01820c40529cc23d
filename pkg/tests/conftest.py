import json
from pathlib import Path

import pytest

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def rle_fixtures():
    with open(FIXTURES_DIR / "rle_fixtures.json") as f:
        return json.load(f)["cases"]
