"""Shared fixtures: a cache of minimization runs and the acceptance reporter."""
import functools

import numpy as np
import pytest

from swarmdim.minimize import MinimizerSettings, init_configuration, minimize
from swarmdim.potentials import PotentialSpec

_CRITERIA = []


@functools.lru_cache(maxsize=None)
def cached_run(spec: PotentialSpec, dim: int, n: int, seed: int, max_iters: int):
    """Minimize from the seeded uniform-ball start; memoized across test modules."""
    config = init_configuration(n, dim, 1.0, seed)
    return minimize(config, spec, MinimizerSettings(max_iters=max_iters))


@pytest.fixture
def criterion(capsys):
    """Print one PASS/FAIL line for an acceptance criterion and remember it."""
    def report(number, ok, detail):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        _CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
