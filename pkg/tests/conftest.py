import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_stable_matrix(rng, m, complex_=False):
    """A random ``m x m`` matrix with spectral norm < 1."""
    M = rng.standard_normal((m, m))
    if complex_:
        M = M + 1j * rng.standard_normal((m, m))
    return 0.9 * M / np.linalg.norm(M, 2)


# -- acceptance summary ----------------------------------------------------------
# test_acceptance.py records one verdict per criterion here; the hook below
# prints them as a block at the end of the run.

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
