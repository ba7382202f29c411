import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from evpos import models
from evpos.positivity import SpectralContext

settings.register_profile(
    "evpos",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("evpos")


@pytest.fixture(scope="session")
def diffusion():
    return models.diffusion_boundary_model(200, 50, 1.0, 0.6, 0.2)


@pytest.fixture(scope="session")
def neg_squared():
    return models.neg_squared_dirichlet_laplacian_1d(199, 0.6)


@pytest.fixture(scope="session")
def bilaplacian():
    return models.clamped_bilaplacian_1d(150)


@pytest.fixture(scope="session")
def neg_squared_ctx(neg_squared):
    return SpectralContext(neg_squared.A)


@pytest.fixture(scope="session")
def bilaplacian_ctx(bilaplacian):
    return SpectralContext(bilaplacian.A)


@pytest.fixture(scope="session")
def diffusion_ctx(diffusion):
    return SpectralContext(diffusion.A)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_acceptance_lines = []


@pytest.fixture
def criterion(capsys):
    """Print one pass/fail line for an acceptance criterion and keep it for the summary."""

    def emit(label, passed, detail):
        line = f"{label:<22} {'PASS' if passed else 'FAIL'}  {detail}"
        _acceptance_lines.append(line)
        with capsys.disabled():
            print(f"\n    {line}")
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
