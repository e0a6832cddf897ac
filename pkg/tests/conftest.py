import io

import numpy as np
import pytest

from rfmseg.ingest import write_transactions


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def csv_bytes(txns) -> bytes:
    buf = io.StringIO()
    write_transactions(txns, buf)
    return buf.getvalue().encode("utf-8")


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    """Fold parametrized cases into one outcome per criterion."""
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when != "call" and report.outcome == "passed":
        return
    name = report.nodeid.split("::")[-1].split("[")[0]
    entry = _ACCEPTANCE.setdefault(name, {"ok": True, "details": []})
    entry["ok"] &= report.outcome == "passed"
    entry["details"] += [str(v) for k, v in report.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, entry in _ACCEPTANCE.items():
        detail = f"  ({'; '.join(entry['details'])})" if entry["details"] else ""
        terminalreporter.write_line(f"{'PASS' if entry['ok'] else 'FAIL'}  {name}{detail}")
