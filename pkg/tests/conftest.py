import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def record_criterion(request):
    """Record one acceptance line; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        status = "PASS" if passed else "FAIL"
        request.config._acceptance_lines.append((number, f"criterion {number:2d}: {status}  {detail}"))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
