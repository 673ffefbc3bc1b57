import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            n, title = mark.args
            _criteria.setdefault(n, {"title": title, "ids": set(), "failed": False, "ran": 0})
            _criteria[n]["ids"].add(item.nodeid)


def pytest_runtest_logreport(report):
    for entry in _criteria.values():
        if report.nodeid in entry["ids"]:
            if report.failed:
                entry["failed"] = True
            if report.when == "call" or (report.when == "setup" and report.skipped):
                entry["ran"] += 1
                if report.skipped:
                    entry["failed"] = True


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        entry = _criteria[n]
        ok = not entry["failed"] and entry["ran"] == len(entry["ids"])
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {entry['title']}")
