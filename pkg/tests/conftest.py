import numpy as np
import pytest

from mfhawkes import SeedPolicy, TimeGrid, builtin_model, solve_limit
from mfhawkes.volterra import build_kappa, build_resolvent


@pytest.fixture(scope="session")
def sigmoid():
    return builtin_model("sigmoid_erlang", (2.0, 2.0))


@pytest.fixture(scope="session")
def grid10():
    return TimeGrid(10.0, 1000)


@pytest.fixture(scope="session")
def limit10(sigmoid, grid10):
    return solve_limit(sigmoid, grid10)


@pytest.fixture(scope="session")
def kappa10(sigmoid, grid10, limit10):
    return build_kappa(limit10, sigmoid, grid10)


@pytest.fixture(scope="session")
def resolvent10(kappa10):
    return build_resolvent(kappa10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def seed():
    return SeedPolicy(20240601)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def announce(request, capsys):
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def emit(k, title, ok, detail):
        line = f"criterion {k:2d} {'PASS' if ok else 'FAIL'} {title}: {detail}"
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
