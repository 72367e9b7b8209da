import numpy as np
import pytest

from taskdecomp.toy import loss_and_grads as _loss_and_grads

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q


def fd_max_rel_error(model, x, y, eps=1e-5):
    """Largest relative error between analytic and central-difference gradients."""
    _, grads = _loss_and_grads(model, x, y)
    worst = 0.0
    for li, (w, b) in enumerate(model.layers):
        for arr, g in ((w, grads[li][0]), (b, grads[li][1])):
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + eps
                lp, _ = _loss_and_grads(model, x, y)
                arr[idx] = old - eps
                lm, _ = _loss_and_grads(model, x, y)
                arr[idx] = old
                fd = (lp - lm) / (2 * eps)
                denom = max(abs(fd), abs(g[idx]), 1e-8)
                worst = max(worst, abs(fd - g[idx]) / denom)
    return worst


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
