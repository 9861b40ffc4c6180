import numpy as np
import pytest

from contactctl.geometry import Pose, Rot6D
from contactctl.kinematics import ChainLink, ChainModel


REPO_CONFIGS = "configs"


def make_planar2(l1: float = 0.5, l2: float = 0.5) -> ChainModel:
    """Two z-axis revolute joints in the xy-plane; FK(0,0) = (l1+l2, 0, 0)."""
    links = [ChainLink(np.array([0.0, 0.0, 1.0]), Pose.identity()),
             ChainLink(np.array([0.0, 0.0, 1.0]), Pose(np.eye(3), [l1, 0.0, 0.0]))]
    limits = [[-2.0 * np.pi, 2.0 * np.pi]] * 2
    return ChainModel(links, limits, Pose(np.eye(3), [l2, 0.0, 0.0]), "planar2")


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rot6D(rng.normal(size=3), rng.normal(size=3)).decode()


def random_chain(rng: np.random.Generator, dof: int) -> ChainModel:
    links = []
    for _ in range(dof):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        offset = Pose(random_rotation(rng), rng.uniform(-0.3, 0.3, 3))
        links.append(ChainLink(axis, offset))
    tool = Pose(random_rotation(rng), rng.uniform(-0.2, 0.2, 3))
    return ChainModel(links, [[-2.0 * np.pi, 2.0 * np.pi]] * dof, tool)


@pytest.fixture
def planar2() -> ChainModel:
    return make_planar2()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
