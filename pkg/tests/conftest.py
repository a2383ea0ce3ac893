"""Prints one pass/fail line per acceptance criterion after the test session."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    criterion = props.get("criterion")
    if criterion is None or not (report.when == "call" or report.outcome != "passed"):
        return
    # parametrized cases of one criterion merge into a single line
    entry = _RESULTS.setdefault(criterion[0], {"title": criterion[1], "ok": True, "details": []})
    entry["ok"] &= report.outcome == "passed"
    if props.get("detail"):
        entry["details"].append(props["detail"])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        status = "PASS" if e["ok"] else "FAIL"
        line = f"criterion {n:>2} {status}  {e['title']}"
        if e["details"]:
            line += "  [" + "; ".join(e["details"]) + "]"
        terminalreporter.write_line(line)
