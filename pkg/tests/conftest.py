import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"
FIXTURES = PROGRAMS / "fixtures"

sys.path.insert(0, str(Path(__file__).resolve().parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def programs_dir():
    return PROGRAMS


@pytest.fixture
def word_count_src():
    return (PROGRAMS / "word_count.pico").read_text(encoding="utf-8")
