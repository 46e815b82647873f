import pytest

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, description): acceptance criterion coverage")


def pytest_runtest_makereport(item, call):
    if call.when != "call":
        return
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, description = marker.args
    if call.excinfo is not None and call.excinfo.errisinstance(
            pytest.skip.Exception):
        return
    outcome = "FAIL" if call.excinfo is not None else "PASS"
    previous = _CRITERIA.get(number)
    if previous is None or previous[0] == "PASS":
        _CRITERIA[number] = (outcome, description)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, description = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number}: {outcome} - {description}")
