import numpy as np
import pytest

from malin.potentials import make_potential


@pytest.fixture(scope="session")
def quadratic():
    return make_potential("Quadratic", n=2)


@pytest.fixture(scope="session")
def aniso():
    return make_potential("AnisotropicQuadratic", {"a": [4.0, 0.25]}, n=2)


@pytest.fixture(scope="session")
def perturbed():
    return make_potential("PerturbedQuadratic", {"delta": 0.1, "freq": [1.0, 1.0]}, n=2)


@pytest.fixture(scope="session")
def perturbed_uneven():
    return make_potential("PerturbedQuadratic", {"delta": 0.1, "freq": [1.0, 2.0]}, n=2)


@pytest.fixture(scope="session")
def radial():
    return make_potential("RadialPower", {"p": 3.0}, n=2)


@pytest.fixture(scope="session")
def all_potentials(quadratic, aniso, perturbed, radial):
    return [quadratic, aniso, perturbed, radial]


def rng(seed=0):
    return np.random.default_rng(seed)
