import numpy as np
import pytest

from qubitjm.povm import Assemblage


def random_directions(rng, n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1)[:, None]


def random_unbiased(rng, n):
    """Uniform directions, lengths uniform in [0, 1]."""
    return Assemblage.from_blochs(random_directions(rng, n) * rng.uniform(0, 1, size=(n, 1)))


def random_biased(rng, n):
    biases = rng.uniform(-0.6, 0.6, size=n)
    lengths = rng.uniform(0, 1, size=n) * (1 - np.abs(biases))
    return Assemblage.from_blochs(random_directions(rng, n) * lengths[:, None], biases)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
