import numpy as np
import pytest

from ucbsde import ModulusFn, WeightFn


@pytest.fixture
def one_weight():
    return WeightFn(fn=lambda t: np.ones_like(np.asarray(t, dtype=float)),
                    integral_oracle=lambda t: t, name="one")


@pytest.fixture
def identity_modulus():
    return ModulusFn(fn=lambda x: np.asarray(x, dtype=float), growth_a=1.0,
                     osgood_declared=True, name="identity")


@pytest.fixture
def sqrt_modulus():
    return ModulusFn(fn=lambda x: np.sqrt(np.asarray(x, dtype=float)),
                     growth_a=0.5, name="sqrt")
