import warnings

import pytest

from bergtents.dyadic import build_adjacent_family
from bergtents.geometry import ModelDomain, sample
from bergtents.operators import KernelOperator
from bergtents.tents import build_tent_systems


@pytest.fixture(scope="session")
def ball1():
    return ModelDomain.ball(1)


@pytest.fixture(scope="session")
def ball2():
    return ModelDomain.ball(2)


@pytest.fixture(scope="session")
def egg2():
    return ModelDomain.egg(2)


@pytest.fixture(scope="session")
def cloud_ball1(ball1):
    return sample(ball1, 1500, 1000, seed=3)


@pytest.fixture(scope="session")
def cloud_ball2(ball2):
    return sample(ball2, 2000, 1200, seed=3)


@pytest.fixture(scope="session")
def cloud_egg2(egg2):
    return sample(egg2, 1200, 800, seed=3)


@pytest.fixture(scope="session")
def family_ball1(cloud_ball1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_adjacent_family(cloud_ball1, 8.0, 0.4, 4, N=2,
                                     base_seed=10)


@pytest.fixture(scope="session")
def tents_ball1(family_ball1, cloud_ball1):
    return build_tent_systems(family_ball1.systems, cloud_ball1,
                              with_kubes=True)


@pytest.fixture(scope="session")
def op_ball1(cloud_ball1):
    return KernelOperator(cloud_ball1)
