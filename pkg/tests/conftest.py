import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def censor_bruteforce(T, t_d):
    """O(n^2) reference: scan every earlier registration for each arrival."""
    registered = []
    for t in T:
        if all(not (r < t <= r + t_d) for r in registered):
            registered.append(t)
    return np.array(registered)


def responsibility_matrix(y, pi0, weights, means, stds, t_r):
    """Posterior matrix by explicit double loop, plain densities (no log domain)."""
    import math

    N, M = len(y), len(weights)
    R = np.zeros((N, M + 1))
    for n in range(N):
        num = [pi0 / t_r if 0 <= y[n] < t_r else 0.0]
        for m in range(M):
            z = (y[n] - means[m]) / stds[m]
            num.append(weights[m] * math.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * stds[m]))
        D = sum(num)
        for l in range(M + 1):
            R[n, l] = num[l] / D
    return R


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = []  # (criterion, passed, detail), filled by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {crit}: {detail}")
