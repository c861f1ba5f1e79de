import pytest

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "passed": True, "details": []})
    if report.failed or report.skipped:
        entry["passed"] = False
    for key, value in item.user_properties:
        if key == "detail" and value not in entry["details"]:
            entry["details"].append(value)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the criterion being checked."""

    def record(text: str) -> None:
        request.node.user_properties.append(("detail", text))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        r = _results[number]
        status = "PASS" if r["passed"] else "FAIL"
        line = f"criterion {number}: {status}  {r['title']}"
        if r["details"]:
            line += f"  [{'; '.join(r['details'])}]"
        terminalreporter.write_line(line)
