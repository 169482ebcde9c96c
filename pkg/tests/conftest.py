import numpy as np
import pytest

from randnls.field import FourierField
from randnls.lattice import LatticeSpec


def random_field(d, M, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    spec = LatticeSpec(d, M)
    c = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    return FourierField(spec, scale * c)


@pytest.fixture
def rand_field():
    return random_field


ACCEPTANCE = []


def record(n, ok, detail):
    """One PASS/FAIL line per acceptance criterion, echoed in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE.append((n, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE, key=lambda x: x[0]):
            terminalreporter.write_line(line)
