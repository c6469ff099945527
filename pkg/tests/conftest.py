"""Echo the acceptance verdict lines after the run.

The gate tests in test_acceptance.py print one [PASS]/[FAIL] line each,
but pytest captures that output on success. Repeating the lines in the
terminal summary keeps them visible in plain `pytest -v` logs.
"""


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if not test_acceptance.VERDICTS:
        return
    terminalreporter.section("acceptance gate")
    for line in test_acceptance.VERDICTS:
        terminalreporter.write_line(line)
