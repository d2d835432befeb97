import pytest

from property_suites import SUITES


@pytest.mark.parametrize("name", list(SUITES))
def test_invariant_suite(name):
    failures = SUITES[name](1000)
    assert not failures, failures[:5]
