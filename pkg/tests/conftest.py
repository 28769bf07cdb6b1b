import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edcpatrol import _kernels_py  # noqa: E402
from edcpatrol.fileio import graph_from_doc  # noqa: E402

DATA = Path(__file__).resolve().parent.parent / "data"

try:
    from edcpatrol import _kernels as _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _kernels_cy is not None:
    BACKENDS.append(pytest.param(_kernels_cy, id="cython"))

_ACCEPTANCE: dict = {}


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def parking_graph():
    return graph_from_doc(str(DATA / "parking_graph.yaml"))


@pytest.fixture
def acceptance_report():
    def record(number, ok, detail):
        _ACCEPTANCE[number] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
