import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def small_world():
    from livinglab.sim import generate_world

    return generate_world(8, 12, seed=3)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines, which are otherwise captured."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if "test_acceptance.py" not in rep.nodeid or rep.when != "call":
                continue
            found = [ln for ln in rep.capstdout.splitlines() if ln.startswith("ACCEPTANCE")]
            lines += found or [f"ACCEPTANCE {rep.nodeid.split('::')[-1]}: FAIL - {rep.longrepr.reprcrash.message}"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":")) if s.split()[2][0].isdigit() else 99):
            terminalreporter.write_line(line)
