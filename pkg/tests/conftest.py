import pytest

from helpers import hand_toy_config, make_session


@pytest.fixture
def hand_config():
    return hand_toy_config()


@pytest.fixture
def hand_session(hand_config):
    return make_session(hand_config)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Print one visible PASS/FAIL line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in item.nodeid:
        reporter = item.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            verdict = "PASS" if report.passed else "FAIL"
            reporter.write_line(f"[ACCEPTANCE] {item.name}: {verdict}")
