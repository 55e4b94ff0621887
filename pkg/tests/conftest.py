from . import test_acceptance


def pytest_terminal_summary(terminalreporter):
    lines = test_acceptance.REPORT
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
