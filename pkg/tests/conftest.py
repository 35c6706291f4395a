import pytest

from cointoss import parse_weight_spec


@pytest.fixture(scope="session")
def geo2():
    return parse_weight_spec("geo:2")


@pytest.fixture(scope="session")
def power_half():
    return parse_weight_spec("power:0.5")


@pytest.fixture(scope="session")
def near_one():
    # stands in for phi = 1, where the measure collapses to a point mass
    return parse_weight_spec("const:0.999999999999")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        passed, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
