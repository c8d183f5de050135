import numpy as np
import pytest


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T) / d + 0.5 * np.eye(d)


def random_spd_stack(rng, n, d):
    return np.stack([random_spd(rng, d) for _ in range(n)])


def random_basis(rng, q, d):
    qmat, r = np.linalg.qr(rng.standard_normal((q, d)))
    return qmat * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
