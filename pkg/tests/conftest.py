import numpy as np
import pytest

from fastomp import normalize_columns


def random_dictionary(N, d, seed):
    return normalize_columns(np.random.default_rng(seed).standard_normal((N, d)))


def orthonormal_dictionary(n, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return normalize_columns(Q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
