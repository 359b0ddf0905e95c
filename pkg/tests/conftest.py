import pytest

from skewfatou.construction import run_construction
from skewfatou.expr import W, Z, Poly


@pytest.fixture(scope="session")
def demo_run():
    """The default construction instance f = z^2, g = w/2, z0 = 2, K = 2 (shared, ~10 s)."""
    return run_construction(Poly((0, 0, 1), Z), Poly((0, 0.5), W), 2.0, K=2, max_degree=1500)


ACCEPTANCE = {}


def record_criterion(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(passed), detail)
    print(f"criterion {n}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
