"""Shared pytest hooks: collect acceptance verdict lines for the terminal summary."""

_LINES = []


def record(line):
    print(line)
    _LINES.append(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: long multi-seed end-to-end criteria")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
