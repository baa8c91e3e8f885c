import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

settings.register_profile(
    "repro", derandomize=True, deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repro")

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """Record one ``ACCEPTANCE <n> PASS|FAIL`` line for the current criterion."""
    state = {}

    def note(number, detail):
        state["number"], state["detail"] = number, detail

    yield note
    if "number" in state:
        failed = request.node.stash.get(_FAILED, False)
        line = f"ACCEPTANCE {state['number']:>2} {'FAIL' if failed else 'PASS'}: {state['detail']}"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)


_FAILED = pytest.StashKey[bool]()


@pytest.hookimpl(wrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call" and rep.failed:
        item.stash[_FAILED] = True
    return rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
