import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_criterion_" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE[name] = (report.outcome, getattr(report, "acceptance_note", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        outcome, _ = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{name}: {'PASS' if outcome == 'passed' else 'FAIL'}")
