import pytest

from salemcantor.schedule import PhiSpec, build_dyadic_schedule, build_flat_schedule, build_general_schedule
from salemcantor.tree import build_tree


@pytest.fixture(scope="session")
def thm2_tree():
    return build_tree(build_dyadic_schedule(0.5, 20), seed=3, depth=16)


@pytest.fixture(scope="session")
def thm3_tree():
    return build_tree(build_flat_schedule(0.5, 20), seed=3, depth=16)


@pytest.fixture(scope="session")
def thm1_tree():
    return build_tree(build_general_schedule(0.5, 0.5, PhiSpec(), False, 10), seed=1)


@pytest.fixture(scope="session")
def second_part_tree():
    return build_tree(build_general_schedule(0.6, 0.4, PhiSpec(), True, 10), seed=1)


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; the line is also printed."""

    def report(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
