import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def numerical_grad(model, loss_fn, eps=1e-5):
    """Central finite differences of ``loss_fn(model)`` w.r.t. every parameter."""
    base = model.flat()
    grad = np.zeros_like(base)
    for i in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[i] += eps
        minus[i] -= eps
        model.set_flat(plus)
        fp = loss_fn(model)
        model.set_flat(minus)
        fm = loss_fn(model)
        grad[i] = (fp - fm) / (2 * eps)
    model.set_flat(base)
    return grad


def max_relative_error(analytic, numeric, floor=1e-6):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_mask(rng, n, k):
    """Random candidate masks: each row non-empty and not full."""
    mask = rng.random((n, k)) < 0.5
    while True:
        sizes = mask.sum(axis=1)
        bad = (sizes == 0) | (sizes == k)
        if not bad.any():
            return mask
        mask[bad] = rng.random((int(bad.sum()), k)) < 0.5


ACCEPTANCE = []


def record_criterion(number, name, ok, detail=""):
    """Log one acceptance line; it is printed again in the terminal summary."""
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{status}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
