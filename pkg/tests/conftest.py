import pytest

# Criterion verdict lines recorded by tests/test_acceptance.py. Replayed in a
# terminal section at the end of the run so they survive stdout capture.
ACCEPTANCE_VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


def pytest_addoption(parser):
    parser.addoption(
        "--paper",
        action="store_true",
        default=False,
        help="run the hours-scale full-size benchmark checks",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--paper"):
        return
    skip = pytest.mark.skip(reason="hours-scale benchmark; opt in with --paper")
    for item in items:
        if "paper" in item.keywords:
            item.add_marker(skip)
