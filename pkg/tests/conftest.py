import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

from bgwcoal import OffspringMeasure  # noqa: E402

PURE_DEATH = {0: 1.0}
BINARY = {0: 2.0, 2: 1.0}
MIXED = {0: 1.0, 2: 1.0, 3: 0.5}
FIXTURES = {"pure_death": PURE_DEATH, "binary": BINARY, "mixed": MIXED}


@pytest.fixture(params=sorted(FIXTURES))
def measure(request):
    return OffspringMeasure(FIXTURES[request.param])


@pytest.fixture
def binary():
    return OffspringMeasure(BINARY)


@pytest.fixture
def pure_death():
    return OffspringMeasure(PURE_DEATH)


@pytest.fixture
def mixed():
    return OffspringMeasure(MIXED)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
