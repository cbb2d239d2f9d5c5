import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_field(grid, rng, nonnegative=False):
    vals = rng.standard_normal(grid.shape)
    if nonnegative:
        vals = np.abs(vals)
    from vlasov_riesz.grid import DistributionField

    return DistributionField(grid, vals)
