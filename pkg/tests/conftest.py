"""Shared test plumbing.

The acceptance tests append one pass/fail line per criterion to a scratch
file; the terminal-summary hook below replays those lines after the run so
they are visible even without -s.
"""
import pathlib

LINES_FILE = pathlib.Path(__file__).with_name(".acceptance_lines")


def pytest_sessionstart(session):
    if LINES_FILE.exists():
        LINES_FILE.unlink()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not LINES_FILE.exists():
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in LINES_FILE.read_text().splitlines():
        terminalreporter.write_line(line)
