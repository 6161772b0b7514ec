import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from isingcrypt import IsingProblem  # noqa: E402


def random_problem(rng, n, density=0.5, integer=True, scale=3):
    """Random sparse problem; integer coefficients in [-scale, scale] or Gaussian reals."""
    draw = (lambda: float(rng.integers(-scale, scale + 1))) if integer else (lambda: float(rng.standard_normal()))
    h = {i: draw() for i in range(n) if rng.random() < 0.8}
    J = {(i, j): draw() for i in range(n) for j in range(i + 1, n) if rng.random() < density}
    offset = draw() if rng.random() < 0.5 else 0.0
    return IsingProblem(n, h, J, offset)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_problem():
    return random_problem
