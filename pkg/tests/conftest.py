from __future__ import annotations

import numpy as np
import pytest

from hamlag.ambient import make_flat_cn, make_sphere
from hamlag.lagrangian import LagrangianRep


def random_spd(rng: np.random.Generator, dim: int, spread: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((dim, dim))
    return A @ A.T + spread * np.eye(dim)


def low_mode_direction(rep: LagrangianRep, rng: np.random.Generator, modes: int = 6) -> np.ndarray:
    """Random potential on the lowest ``modes`` basis functions, scaled to unit sup norm."""
    v = np.zeros(rep.basis.size)
    v[:modes] = rng.standard_normal(modes)
    return v / np.max(np.abs(rep.basis.evaluate(v, rep.grid_size)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def flat1():
    return make_flat_cn(1)


@pytest.fixture(scope="session")
def flat2():
    return make_flat_cn(2)


@pytest.fixture(scope="session")
def sphere_so2():
    return make_sphere(group="so2")


@pytest.fixture(scope="session")
def sphere_so3():
    return make_sphere(group="so3")


@pytest.fixture(scope="session")
def circle(flat1):
    return LagrangianRep.standard(flat1, [1.0])


@pytest.fixture(scope="session")
def torus(flat2):
    return LagrangianRep.standard(flat2, [1.0, 2.0])


@pytest.fixture(scope="session")
def equator(sphere_so3):
    return LagrangianRep.standard(sphere_so3, [0.0])


@pytest.fixture(scope="session")
def latitude(sphere_so3):
    return LagrangianRep.standard(sphere_so3, [0.5])
