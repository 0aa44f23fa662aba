import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def gaussian_scaled(rng, m, n):
    return rng.standard_normal((m, n)) / np.sqrt(m)
