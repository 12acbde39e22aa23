"""Shared pytest hooks: a one-line verdict per acceptance criterion."""

_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" in report.nodeid and name.startswith("test_criterion_"):
        if report.when == "call" or report.outcome == "failed":
            key = name.replace("test_", "", 1)
            _CRITERIA[key] = max(
                _CRITERIA.get(key, "passed"),
                report.outcome,
                key=lambda o: o == "failed",
            )


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda s: int(s.split("_")[1])):
        verdict = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict}")
