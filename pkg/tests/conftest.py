import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drolab.support import DiscreteDistribution, SupportGrid


@pytest.fixture
def line_grid() -> SupportGrid:
    return SupportGrid.euclidean([[0.0], [1.0], [3.0]])


@pytest.fixture
def square_grid() -> SupportGrid:
    return SupportGrid.euclidean([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def random_grid(rng: np.random.Generator, m: int, dim: int = 1, scale: float = 3.0) -> SupportGrid:
    while True:
        atoms = np.round(rng.uniform(-scale, scale, size=(m, dim)), 6)
        if len({tuple(a) for a in atoms}) == m:
            return SupportGrid.euclidean(atoms)


def random_distribution(rng: np.random.Generator, grid: SupportGrid) -> DiscreteDistribution:
    w = rng.dirichlet(np.ones(grid.size))
    return DiscreteDistribution(grid, w)
