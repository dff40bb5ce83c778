import numpy as np
import pytest


def random_spd(p, rng, cond=10.0):
    """SPD matrix with log-uniform spectrum in ``[1, cond]`` and Haar basis."""
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    w = np.exp(rng.uniform(0.0, np.log(cond), p))
    A = (Q * w) @ Q.T
    return 0.5 * (A + A.T)


def random_sym(p, rng):
    A = rng.standard_normal((p, p))
    return 0.5 * (A + A.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one ``PASS``/``FAIL`` line for the terminal summary and return ``ok``."""

    def _report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return bool(ok)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
