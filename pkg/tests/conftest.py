import numpy as np
import pytest

from coarselab import (
    cycle_space,
    path_space,
    complete_space,
    tree_space,
    hypercube_space_graph,
    random_regular_graph,
)


def small_space_corpus():
    """25 spaces with at most 12 points: cycles, paths, trees, hypercubes,
    random-regular graph metrics."""
    spaces = []
    for n in range(4, 9):
        spaces.append((f"cycle{n}", cycle_space(n)))
    for n in range(2, 9):
        spaces.append((f"path{n}", path_space(n)))
    for branch, depth in [(2, 1), (2, 2), (3, 1)]:
        spaces.append((f"tree{branch}x{depth}", tree_space(branch, depth)))
    for k in (1, 2, 3):
        spaces.append((f"cube{k}", hypercube_space_graph(k)))
    for seed in range(7):
        g = random_regular_graph(8, 3, seed=seed)
        spaces.append((f"rr8-3s{seed}", g.metric_space()))
    assert len(spaces) == 25
    return spaces


@pytest.fixture(scope="session")
def corpus():
    return small_space_corpus()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
