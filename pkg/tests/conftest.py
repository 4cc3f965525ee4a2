import pytest

from perfgraph.ingest import ComparisonRecord

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


@pytest.fixture
def fig1_records():
    # three methods, two benefit metrics; reporter P
    vals = {"A": (0.5, 0.8), "B": (0.6, 0.7), "C": (0.7, 0.9)}
    out = []
    for j, metric in enumerate(("z1", "z2")):
        for x, y in (("A", "B"), ("A", "C"), ("B", "C")):
            (lo, vlo), (hi, vhi) = sorted([(x, vals[x][j]), (y, vals[y][j])], key=lambda t: t[1])
            out.append(ComparisonRecord(metric, lo, vlo, hi, vhi, "P"))
    return out


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "FAIL"
        prev = _ACCEPTANCE.get(report.nodeid)
        if prev is None or prev[1] == "PASS":
            _ACCEPTANCE[report.nodeid] = (crit, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (crit, status) in sorted(_ACCEPTANCE.items(), key=lambda kv: (kv[1][0], kv[0])):
        terminalreporter.write_line(f"{status}  {crit:<4} {nodeid.split('::', 1)[1]}")
