import numpy as np
import pytest

from collapse_lab.streams import stream


@pytest.fixture
def rng() -> np.random.Generator:
    return stream(12345, "tests")
