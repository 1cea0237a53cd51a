"""Shared pytest plumbing: collect per-criterion result lines and print
them in the terminal summary, where output capture no longer applies."""

RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
