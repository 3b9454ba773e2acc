"""Shared test plumbing: collect acceptance one-liners for the final report.

The acceptance tests each record one human-readable verdict line; printing
them from a terminal-summary hook keeps them visible in a plain ``pytest -v``
run, where per-test stdout is captured and discarded on success.
"""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance summary")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
