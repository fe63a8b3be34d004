"""Shared test plumbing.

The acceptance suite registers one line per criterion here; the summary
hook prints them after the run, outside pytest's output capture, so the
PASS/FAIL verdicts are visible in any log.
"""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines:
        terminalreporter.write_line(line)
