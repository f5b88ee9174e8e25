import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def orders(residuals):
    r = np.asarray(residuals, dtype=float)
    return np.log2(r[:-1] / r[1:])


@pytest.fixture
def unit_square():
    from corner_moser import Domain, make_grid

    return lambda n: make_grid(Domain.cube(2), n)
