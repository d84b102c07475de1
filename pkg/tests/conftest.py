import os
import sys
from dataclasses import dataclass
from typing import List

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as SciRotation

# Add the project root directory to Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from gp4pc.core_types import (Correspondence, GeneralizedCamera, PinholeCamera, Ray,  # noqa: E402
                              SimilarityTransform, invert_similarity, look_at, project)


@dataclass
class MinimalProblem:
    """Four rays through known rig points, plus the world points a known similarity maps onto them."""
    correspondences: List[Correspondence]
    rig: GeneralizedCamera
    truth: SimilarityTransform
    rig_points: np.ndarray
    world_points: np.ndarray
    depths: np.ndarray

    @property
    def rays(self) -> List[Ray]:
        return [c.ray for c in self.correspondences]


PINHOLES = np.array([
    [0.0, 0.0, 8.0],
    [2.0, 0.5, 7.0],
    [-2.0, 1.0, 9.0],
    [1.0, -2.0, 8.5],
])


def make_truth() -> SimilarityTransform:
    rotation = SciRotation.from_rotvec([0.3, -0.2, 0.5]).as_matrix()
    return SimilarityTransform(1.7, rotation, np.array([0.5, -1.0, 2.0]))


def build_problem(rig_points: np.ndarray, truth: SimilarityTransform,
                  pinholes: np.ndarray = PINHOLES) -> MinimalProblem:
    cameras = []
    for center, point in zip(pinholes, rig_points):
        cameras.append(PinholeCamera(center, look_at(center, point + [0.3, -0.2, 0.0], [0.0, 1.0, 0.0]),
                                     1000.0, 1000, 1000))
    rig = GeneralizedCamera(tuple(cameras))
    world = invert_similarity(truth).apply(rig_points)
    correspondences = [rig.observe(world[i], i, project(rig.cameras[i], rig_points[i])) for i in range(4)]
    return MinimalProblem(
        correspondences=correspondences,
        rig=rig,
        truth=truth,
        rig_points=rig_points,
        world_points=world,
        depths=np.linalg.norm(rig_points - pinholes, axis=1),
    )


@pytest.fixture
def minimal_problem() -> MinimalProblem:
    """A well-conditioned non-coplanar minimal problem."""
    rig_points = np.array([
        [1.0, 0.5, 0.0],
        [-1.5, 1.0, 0.4],
        [0.2, -1.2, 1.5],
        [0.6, 0.4, -1.3],
    ])
    return build_problem(rig_points, make_truth())


@pytest.fixture
def coplanar_problem() -> MinimalProblem:
    """A minimal problem whose four points lie on a tilted plane."""
    rotation = SciRotation.from_rotvec([0.4, 0.1, -0.3]).as_matrix()
    flat = np.array([
        [1.5, 0.3, 0.0],
        [-1.2, 1.1, 0.0],
        [0.4, -1.6, 0.0],
        [-0.7, -0.9, 0.0],
    ])
    return build_problem(flat @ rotation.T + [0.2, -0.1, 0.3], make_truth())


@pytest.fixture
def problem_builder():
    """build_problem(rig_points, truth, pinholes) for tests that need their own geometry."""
    return build_problem
