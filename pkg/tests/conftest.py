from pathlib import Path

import pytest

from argead.config import InputPaths
from argead.metric import read_candidates
from argead.store import ingest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def store():
    return ingest(
        DATA / "games.json", DATA / "rosters.json", DATA / "clips.jsonl", DATA / "context.jsonl", DATA / "action_lexicon.json"
    )


@pytest.fixture(scope="session")
def fixture_ads() -> dict[str, str]:
    return {c.clip_id: c.ad_text for c in read_candidates(DATA / "candidates.jsonl")}


@pytest.fixture
def inputs() -> InputPaths:
    return InputPaths.from_dir(DATA)
