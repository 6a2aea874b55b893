"""Test-wide plumbing: echo acceptance verdict lines after the run."""

import acceptance_report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_report.LINES:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(acceptance_report.LINES):
            terminalreporter.write_line(acceptance_report.LINES[cid])
