import numpy as np
import pytest

from lowsig import kernels


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(kernels, "_impl", kernels.get_backend(request.param))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record a criterion result; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
