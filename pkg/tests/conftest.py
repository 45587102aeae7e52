import random

import pytest

from ectaks.fixtures import load_curve
from ectaks.topology import Ant


@pytest.fixture(scope="session")
def toy3():
    return load_curve("toy3")


@pytest.fixture(scope="session")
def toy11():
    return load_curve("toy11")


@pytest.fixture(scope="session")
def mid():
    return load_curve("mid1009")


@pytest.fixture
def triangle():
    return Ant.from_edges(3, [(1, 2), (1, 3), (2, 3)])


def random_ant(rng: random.Random, max_n: int = 12, density: float = 0.35) -> Ant:
    n = rng.randint(1, max_n)
    edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if rng.random() < density]
    return Ant.from_edges(n, edges)
