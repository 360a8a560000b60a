# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from curlspec.mesh import BoxSpec, build_box_mesh, build_fixture_mesh  # noqa: E402


@pytest.fixture(scope="session")
def cube2():
    return build_box_mesh(BoxSpec.cube(np.pi, 2))


@pytest.fixture(scope="session")
def cube3():
    return build_box_mesh(BoxSpec.cube(np.pi, 3))


@pytest.fixture(scope="session")
def lshape1():
    return build_fixture_mesh("lshape", 1)


@pytest.fixture(scope="session")
def fichera1():
    return build_fixture_mesh("fichera", 1)


@pytest.fixture
def unit_tet():
    return np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture
def skew_tet():
    return np.array([[0.1, -0.2, 0.0], [1.3, 0.1, 0.2], [0.2, 0.9, -0.1], [0.3, 0.4, 1.1]])
