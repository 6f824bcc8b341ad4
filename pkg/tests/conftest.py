from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_rational_field(rng, shape, den=7):
    nums = rng.integers(-20, 21, size=shape)
    out = np.empty(shape, dtype=object)
    for idx, v in np.ndenumerate(nums):
        out[idx] = Fraction(int(v), den)
    return out
