import numpy as np
import pytest
from hypothesis import settings

from qmetro.channel import channel_parts, jump_ensemble
from qmetro.hamiltonians import build_tfim, eigensystem
from qmetro.qpe import energy_grid

settings.register_profile("qmetro", max_examples=25, deadline=None)
settings.load_profile("qmetro")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tfim2():
    return eigensystem(build_tfim(2, 1.0, 0.5))


@pytest.fixture(scope="session")
def pauli2():
    return jump_ensemble("pauli", 2)


@pytest.fixture(scope="session")
def parts_r3g3(tfim2, pauli2):
    return channel_parts(tfim2, energy_grid(3, tfim2.kappa), 3, pauli2, 1.0)


def random_density(d, rng):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)
