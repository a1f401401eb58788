import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

T1_X = np.array([[1.0, 0.0], [1.0, 1.0]])
T1_Y = np.array([1.0, 3.0])
T2_X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
T2_Y = np.array([1.0, 3.0, 4.0])
T3_Y = np.array([1.0, math.e, math.e ** 2])


def rel_err(a, b) -> float:
    """Normwise relative error of ``a`` against reference ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / (nb if nb > 0 else 1.0))


def score_err(a, b) -> float:
    if math.isinf(a) or math.isinf(b):
        return 0.0 if a == b else math.inf
    return abs(a - b) / max(abs(b), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_problem(rng, n, p, sigma=1.0, intercept=True, positive=False):
    """Random design (uniform features, optional intercept column) and response."""
    k = p - 1 if intercept else p
    X = rng.uniform(-1, 1, size=(n, k))
    if intercept:
        X = np.hstack([np.ones((n, 1)), X])
    beta = rng.normal(size=p)
    y = X @ beta + sigma * rng.standard_normal(n)
    if positive:
        y = np.exp(y / max(1.0, np.abs(beta).sum()))
    return X, y, beta


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
