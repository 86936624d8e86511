import json
from pathlib import Path

import numpy as np
import pytest

from lmlas.channel import two_bit_channel

ORACLES = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.fixture
def oracle():
    return ORACLES


@pytest.fixture
def two_bit():
    """The rho = 0.4, A = (1, 0.6) two-bit channel, noiseless."""
    return two_bit_channel(0.4, 1.0, 0.6, sigma=0.0)


@pytest.fixture
def report(request):
    """Attach a one-line measurement summary to an acceptance test."""
    marker = request.node.get_closest_marker("acceptance")
    lines = []
    yield lines.append
    if marker is not None:
        _acceptance.setdefault(request.node.nodeid, {})["detail"] = "; ".join(lines)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    entry = _acceptance.setdefault(item.nodeid, {})
    entry["number"], entry["title"] = marker.args
    entry["passed"] = call.excinfo is None


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(_acceptance.values(), key=lambda e: e.get("number", 0)):
        if "number" not in e:
            continue
        status = "PASS" if e.get("passed") else "FAIL"
        detail = f"  [{e['detail']}]" if e.get("detail") else ""
        terminalreporter.write_line(f"criterion {e['number']:>2} {status}: {e['title']}{detail}")
