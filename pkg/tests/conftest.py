import numpy as np
import pytest

from resetsim.config import parse_config
from resetsim.fixtures import fixture_names, get_fixture

_CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(n: int, checks) -> bool:
    """Store and print the outcome of acceptance criterion ``n``."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label} [{'ok' if good else 'FAIL'}: {obs}]" for label, good, obs in checks)
    _CRITERIA[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def configs():
    return {name: parse_config(get_fixture(name)) for name in fixture_names()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
