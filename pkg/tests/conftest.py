import numpy as np
import pytest

from qaggregates.bath import default_spectral_density, kernel_from_spectral_density


@pytest.fixture(scope="session")
def default_sd():
    return default_spectral_density()


@pytest.fixture(scope="session")
def default_kernel(default_sd):
    return kernel_from_spectral_density(default_sd)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion; returns ``report(k, ok, detail)``."""

    def report(k: int, ok: bool, detail: str) -> bool:
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[k] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
