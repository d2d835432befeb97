import json
import math
import os

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def oracle():
    with open(os.path.join(HERE, "oracles", "oracle_values.json")) as fh:
        return json.load(fh)


def phase_diff(a: float, b: float) -> float:
    """Difference of two phases reduced to (-pi, pi]."""
    return (a - b + math.pi) % (2.0 * math.pi) - math.pi


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
