import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `import oracles` work

from chemofv import LinearSolver, build_uniform_rect_mesh


@pytest.fixture
def solver():
    return LinearSolver()


@pytest.fixture
def mesh_2cell():
    # two unit-measure cells sharing one edge with tau = 1
    return build_uniform_rect_mesh((0.0, 2.0), (0.0, 1.0), 2, 1)


@pytest.fixture
def mesh_small():
    return build_uniform_rect_mesh((0.0, 1.0), (0.0, 1.0), 4, 4)
