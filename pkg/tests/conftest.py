import pytest

# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def criterion():
    """Recorder for acceptance outcomes, printed in the terminal summary."""
    def record(num, title, passed, detail):
        ACCEPTANCE_RESULTS[num] = (title, bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(
            "criterion {}: {} - {} ({})".format(
                num, "PASS" if passed else "FAIL", title, detail))
