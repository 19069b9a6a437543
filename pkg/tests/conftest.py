import numpy as np
import pytest

from mmsqueeze.pipeline import calibrated_model


@pytest.fixture(scope="session")
def model():
    return calibrated_model()


@pytest.fixture(scope="session")
def frexel_state(model):
    return model.frexel_state()


def random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
