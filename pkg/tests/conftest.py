import pytest

from spatialrumor.lattice import Boundary, Configuration, Lattice, Params

_CRITERIA = []


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion."""

    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} {detail}".rstrip()
        _CRITERIA.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA, key=lambda x: x[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def ring5():
    return Lattice(1, 5)


@pytest.fixture
def ring4():
    return Lattice(1, 4)


@pytest.fixture
def params21():
    return Params(2.0, 1.0)


@pytest.fixture
def single4(ring4):
    return Configuration.single_spreader(ring4, 0)
