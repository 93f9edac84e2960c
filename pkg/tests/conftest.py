"""Shared test infrastructure: acceptance summary lines.

The acceptance tests register one ``CRITERION nn: PASS/FAIL`` line each;
printing happens in the terminal summary so the lines survive output
capture and appear once at the end of every run.
"""
from __future__ import annotations

criterion_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(criterion_lines):
        terminalreporter.write_line(line)
