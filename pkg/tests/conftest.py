import pytest

_ACCEPTANCE: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and (rep.when == "call" or rep.failed):
        label = item.get_closest_marker("criterion")
        title = label.args[0] if label else item.name
        if rep.when == "call" or not any(t == title for t, _ in _ACCEPTANCE):
            _ACCEPTANCE.append((title, "PASS" if rep.passed else "FAIL"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(title): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for title, status in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {title}")
