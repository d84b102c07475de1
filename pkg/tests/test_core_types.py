"""
Tests for geometric value types and camera projection.
"""
import numpy as np
import pytest

from gp4pc.core_types import (PinholeCamera, Ray, SimilarityTransform, as_rotation, backproject,
                              compose_similarity, invert_similarity, look_at, project)
from gp4pc.errors import BehindCamera


class TestRay:
    def test_direction_is_normalized(self):
        """A non-unit direction is rescaled to unit length."""
        ray = Ray([0.0, 0.0, 0.0], [0.0, 3.0, 4.0])
        assert np.linalg.norm(ray.direction) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(ray.point_at(5.0), [0.0, 3.0, 4.0])

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            Ray([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])

    def test_closest_depth(self):
        """Orthogonal projection onto the ray gives the signed depth."""
        ray = Ray([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
        assert ray.closest_depth([4.0, 2.0, -1.0]) == pytest.approx(3.0)
        assert ray.closest_depth([-1.0, 0.0, 0.0]) == pytest.approx(-2.0)


class TestRotation:
    def test_reflection_rejected(self):
        with pytest.raises(ValueError):
            as_rotation(np.diag([1.0, 1.0, -1.0]))

    def test_non_orthonormal_rejected(self):
        with pytest.raises(ValueError):
            as_rotation(np.diag([1.0, 2.0, 0.5]))

    def test_look_at_points_optical_axis(self):
        center = np.array([1.0, 2.0, 10.0])
        target = np.array([0.0, 0.0, 0.0])
        orientation = look_at(center, target, [0.0, 1.0, 0.0])
        axis = (target - center) / np.linalg.norm(target - center)
        np.testing.assert_allclose(orientation[:, 2], axis, atol=1e-12)
        assert np.linalg.det(orientation) == pytest.approx(1.0)

    def test_look_at_with_parallel_up(self):
        """An up vector along the viewing direction still yields a rotation."""
        orientation = look_at([0.0, 0.0, 5.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
        assert np.linalg.det(orientation) == pytest.approx(1.0)


class TestSimilarity:
    def test_inverse_and_compose(self, minimal_problem):
        truth = minimal_problem.truth
        round_trip = compose_similarity(invert_similarity(truth), truth)
        assert round_trip.scale == pytest.approx(1.0)
        np.testing.assert_allclose(round_trip.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(round_trip.translation, np.zeros(3), atol=1e-12)

    def test_matrix_matches_apply(self, minimal_problem):
        truth = minimal_problem.truth
        point = np.array([0.3, -2.0, 1.1])
        homogeneous = truth.matrix() @ np.append(point, 1.0)
        np.testing.assert_allclose(homogeneous[:3], truth.apply(point), atol=1e-12)

    def test_non_positive_scale_rejected(self):
        with pytest.raises(ValueError):
            SimilarityTransform(0.0, np.eye(3), np.zeros(3))


class TestProjection:
    def setup_method(self):
        self.camera = PinholeCamera([0.0, 0.0, 10.0], look_at([0.0, 0.0, 10.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
                                    1000.0, 1000, 800)

    def test_principal_point_defaults_to_center(self):
        np.testing.assert_allclose(self.camera.principal_point, [500.0, 400.0])

    def test_backprojected_ray_hits_point(self):
        """The ray through the projection of a point passes through that point."""
        point = np.array([1.2, -0.7, 0.5])
        ray = backproject(self.camera, project(self.camera, point))
        depth = ray.closest_depth(point)
        np.testing.assert_allclose(ray.point_at(depth), point, atol=1e-10)

    def test_point_behind_camera(self):
        with pytest.raises(BehindCamera):
            project(self.camera, [0.0, 0.0, 20.0])

    def test_in_image(self):
        assert self.camera.in_image(np.array([10.0, 10.0]))
        assert not self.camera.in_image(np.array([1000.0, 10.0]))
        assert not self.camera.in_image(np.array([-0.5, 10.0]))


if __name__ == '__main__':
    pytest.main()
