import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geoforge import synth
from geoforge.mesh import normalize_mesh


@pytest.fixture(scope="session")
def norm_icosphere2():
    mesh, _ = normalize_mesh(synth.icosphere(1.0, 2))
    return mesh


@pytest.fixture(scope="session")
def norm_box():
    mesh, _ = normalize_mesh(synth.box((1.2, 0.9, 0.7)))
    return mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
