import warnings

import pytest

from egamma_dp.kernels import RegularityWarning

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []
    # The second figure uses rho > beta on purpose; the warning is expected there.
    warnings.filterwarnings("ignore", category=RegularityWarning)


@pytest.fixture
def acceptance(request):
    """Records one PASS/FAIL line per acceptance criterion and prints it."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number, title, passed, measured):
        line = f"{'PASS' if passed else 'FAIL'}  [{number}] {title}: {measured}"
        print(line)
        lines.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def repo_root():
    from pathlib import Path
    return Path(__file__).resolve().parents[1]
