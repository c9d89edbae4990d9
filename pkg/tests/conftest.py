import pytest

from surfsplit.mesh import build_octahedron_sphere

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def meshes():
    """Octahedral sphere meshes by level, built once per session."""
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = build_octahedron_sphere(level)
        return cache[level]

    return get


@pytest.fixture(scope="session")
def record_criterion():
    def record(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
