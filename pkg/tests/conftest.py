import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fbdual import mesh as M  # noqa: E402
from fbdual import phase  # noqa: E402


@pytest.fixture(scope="session")
def square1():
    return M.build_square(1)


@pytest.fixture(scope="session")
def z_square(square1):
    return phase.random_phase_point(square1, 0)


@pytest.fixture(scope="session")
def disk_small():
    return M.build_disk(2, 6)


@pytest.fixture(scope="session")
def annulus_small():
    return M.build_annulus(1, 4, 0.5, 1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
