import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from stockflow.modelfmt import parse_model  # noqa: E402
from stockflow.oilmarket import data_path  # noqa: E402


@pytest.fixture
def model_of():
    return lambda text: parse_model(text, "<test>")


@pytest.fixture
def data():
    return data_path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: int(k[1:])):
        status, line = RESULTS[key]
        terminalreporter.write_line(f"{status} {key}: {line}")
