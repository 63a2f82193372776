import pytest

from fuzzydevs.fuzzy import default_rule_base


@pytest.fixture(scope="session")
def rule_base():
    return default_rule_base()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
