import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from strongld.polyfield import PolyVectorField, TimeCoefficient, Harmonic  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def random_field(rng, dimension, degree=4, n_terms=6, forcing=True):
    """Polynomial field with coefficients in [-3, 3] and total degree <= ``degree``."""
    comps = []
    for _ in range(dimension):
        terms = {}
        for _ in range(n_terms):
            exps = [0] * dimension
            for _ in range(int(rng.integers(0, degree + 1))):
                exps[int(rng.integers(dimension))] += 1
            terms[tuple(exps)] = terms.get(tuple(exps), 0.0) + rng.uniform(-3, 3)
        if forcing:
            zero = (0,) * dimension
            harm = (Harmonic(rng.uniform(-1, 1), rng.uniform(0.5, 6), "sin"),
                    Harmonic(rng.uniform(-1, 1), rng.uniform(0.5, 6), "cos"))
            terms[zero] = TimeCoefficient(terms.get(zero, 0.0), harm)
        comps.append(terms)
    return PolyVectorField(dimension, comps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion."""
    def record(number, name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {name}" + (f" ({detail})" if detail else ""))
        print(ACCEPTANCE_LINES[-1])
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
