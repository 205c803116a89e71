import pytest

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion, reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (report.when == "call" or (report.when == "setup" and report.failed)):
        return
    note = getattr(item, "acceptance_note", "")
    status = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE.append(f"{status}  {marker.args[0]}  ({report.duration:.2f}s){'  ' + note if note else ''}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)


@pytest.fixture
def note(request):
    """Attach a short note to the acceptance summary line of this test."""
    def set_note(text):
        request.node.acceptance_note = text
    return set_note
