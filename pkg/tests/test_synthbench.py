"""
Tests for synthetic scene generation, error metrics and the benchmark runners.
"""
import dataclasses

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as SciRotation

from gp4pc.congruence import coplanarity_test
from gp4pc.core_types import SimilarityTransform
from gp4pc.pipeline import SolverPath
from gp4pc.robust import reprojection_errors
from gp4pc.synthbench import (SceneRecipe, TransformKind, derive_seed, error_report, generate,
                              rotation_angle_deg, run_noise_sweep, run_ransac_sweep, run_stability, run_timing)


class TestSceneRecipe:
    @pytest.mark.parametrize("kwargs", [
        dict(num_points=3),
        dict(num_cameras=0),
        dict(noise_sigma_px=-1.0),
        dict(outlier_fraction=1.0),
        dict(point_cube=(1.0, 1.0)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SceneRecipe(**kwargs)


class TestGenerate:
    def test_truth_reprojects_exactly(self):
        problem = generate(SceneRecipe(num_points=30, seed=3))
        errors = reprojection_errors(problem.ground_truth, problem.correspondences, problem.rig)
        assert errors.max() < 1e-6
        assert problem.inlier_mask.all()

    def test_depths_match_rays(self):
        problem = generate(SceneRecipe(num_points=10, seed=4))
        for corr, depth in zip(problem.correspondences, problem.depths):
            point = problem.ground_truth.apply(corr.world_point)
            assert corr.ray.closest_depth(point) == pytest.approx(depth, rel=1e-9)

    def test_identity_transform(self):
        problem = generate(SceneRecipe(num_points=5, transform=TransformKind.IDENTITY, seed=5))
        np.testing.assert_allclose(problem.ground_truth.rotation, np.eye(3))
        assert problem.ground_truth.scale == 1.0

    def test_coplanar_points(self):
        problem = generate(SceneRecipe(num_points=12, coplanar=True, seed=6))
        world = np.array([c.world_point for c in problem.correspondences])
        for start in range(0, 12, 4):
            assert coplanarity_test(world[start:start + 4])

    def test_outlier_mask(self):
        problem = generate(SceneRecipe(num_points=40, outlier_fraction=0.25, seed=7))
        assert problem.inlier_mask.sum() == 30
        errors = reprojection_errors(problem.ground_truth, problem.correspondences, problem.rig)
        assert errors[problem.inlier_mask].max() < 1e-6

    def test_deterministic(self):
        recipe = SceneRecipe(num_points=10, noise_sigma_px=1.0, seed=8)
        first, second = generate(recipe), generate(recipe)
        np.testing.assert_array_equal([c.pixel for c in first.correspondences],
                                      [c.pixel for c in second.correspondences])

    def test_derive_seed_streams_differ(self):
        assert derive_seed(0, 1) != derive_seed(1, 0)
        assert derive_seed(3, 4) == derive_seed(3, 4)


class TestErrorReport:
    def test_zero_against_itself(self):
        problem = generate(SceneRecipe(num_points=10, seed=9))
        report = error_report(problem.ground_truth, problem.ground_truth, problem)
        assert report.rotation_error_deg == pytest.approx(0.0, abs=1e-6)
        assert report.translation_error == pytest.approx(0.0)
        assert report.scale_error == pytest.approx(0.0)
        assert report.position_error == pytest.approx(0.0, abs=1e-9)
        assert report.inlier_count == 10
        assert report.depth_rmse == pytest.approx(0.0, abs=1e-6)

    def test_one_degree_rotation(self):
        truth = SimilarityTransform.identity()
        rotated = SimilarityTransform(1.0, SciRotation.from_rotvec(np.radians(1.0) * np.array([0.0, 0.6, 0.8]))
                                      .as_matrix(), np.zeros(3))
        assert error_report(rotated, truth).rotation_error_deg == pytest.approx(1.0)

    def test_rotation_angle_matches_scipy(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            rotation = SciRotation.from_quat(rng.standard_normal(4))
            assert rotation_angle_deg(rotation.as_matrix()) == pytest.approx(np.degrees(rotation.magnitude()))

    def test_rotation_angle_near_half_turn(self):
        half_turn = SciRotation.from_rotvec([0.0, 0.0, np.pi - 1e-9]).as_matrix()
        assert rotation_angle_deg(half_turn) == pytest.approx(180.0)

    def test_scale_and_translation(self):
        truth = SimilarityTransform(2.0, np.eye(3), np.array([3.0, 0.0, 4.0]))
        estimate = SimilarityTransform(2.2, np.eye(3), np.array([3.0, 0.0, 4.5]))
        report = error_report(estimate, truth)
        assert report.scale_error == pytest.approx(0.1)
        assert report.translation_error == pytest.approx(0.5)
        assert report.translation_error_rel == pytest.approx(0.1)


class TestRunners:
    def test_stability(self):
        report = run_stability(trials=5, seed=1, threads=1)
        assert len(report.rows) == 5
        assert report.fraction_below(1e-6) == 1.0
        assert np.all(np.diff(report.cdf) >= 0.0)

    def test_stability_deterministic_across_threads(self):
        serial = run_stability(trials=4, seed=2, threads=1)
        pooled = run_stability(trials=4, seed=2, threads=2)
        assert serial.rows == pooled.rows

    def test_coplanar_stability_uses_closed_form(self):
        report = run_stability(trials=3, recipe=SceneRecipe(coplanar=True, transform=TransformKind.IDENTITY),
                               seed=3, threads=1)
        assert all(row['path'] == SolverPath.COPLANAR.value for row in report.rows)
        assert report.fraction_below(1e-6) == 1.0

    @pytest.mark.slow
    def test_noise_sweep_rows(self):
        recipe = SceneRecipe(num_points=20)
        rows = run_noise_sweep(levels=(0.0, 1.0), recipe=recipe, runs=2, seed=4, iterations=20, threads=1)
        assert [(r['noise_sigma_px'], r['method']) for r in rows] == [
            (0.0, "ransac"), (0.0, "minimal"), (1.0, "ransac"), (1.0, "minimal")]
        assert rows[0]['rotation_error_deg'] < 1e-4

    @pytest.mark.slow
    def test_ransac_sweep_rows(self):
        recipe = SceneRecipe(num_points=20)
        rows = run_ransac_sweep(outlier_levels=(0.25,), noise_levels=(0.5,), recipe=recipe, runs=2,
                                seed=5, iterations=50, threads=1)
        assert [r['variant'] for r in rows] == ["gP4Pc+s(1p)", "gP4Pc+a(1p)"]
        for row in rows:
            assert 0.0 <= row['success_rate'] <= 1.0
            assert row['runs'] == 2

    def test_timing_without_trials(self):
        assert run_timing(trials=0).empty

    def test_timing_rows(self):
        report = run_timing(trials=3, seed=6, warmup=1)
        assert len(report.rows) == 4
        assert set(report.speedup) == {"+s", "+a"}
        coplanar = [r for r in report.rows if r['path'] == SolverPath.COPLANAR.value]
        assert all(1 <= r['mean_solutions'] <= 2 for r in coplanar)


def test_recipe_replace_keeps_validation():
    with pytest.raises(ValueError):
        dataclasses.replace(SceneRecipe(), outlier_fraction=-0.1)


@pytest.fixture(scope="module")
def stability_rows():
    return run_stability(trials=1000, seed=0, threads=4).rows


@pytest.mark.slow
class TestBenchmarksAtScale:
    def test_general_stability(self, stability_rows):
        """Noise-free minimal problems: depth RMSE <= 1e-2 and rotation <= 0.1 degree in >= 90% of trials."""
        accurate = [r['depth_rmse'] <= 1e-2 and r['rotation_error_deg'] <= 0.1 for r in stability_rows]
        assert np.mean(accurate) >= 0.9

    def test_solution_counts(self, stability_rows):
        counts = [r['num_solutions'] for r in stability_rows]
        assert max(counts) <= 16
        assert 1.0 <= np.mean(counts) <= 6.0

    def test_coplanar_exact_recovery(self):
        recipe = SceneRecipe(coplanar=True, transform=TransformKind.IDENTITY)
        rows = run_stability(trials=1000, recipe=recipe, seed=1, threads=4).rows
        scene_scale = recipe.point_cube[1] - recipe.point_cube[0]
        exact = [r['rotation_error_deg'] <= 1e-4 and r['scale_error'] <= 1e-6
                 and r['translation_error'] <= 1e-6 * scene_scale for r in rows]
        assert np.mean(exact) >= 0.99

    def test_coplanar_speedup(self):
        report = run_timing(trials=200, seed=2)
        assert report.speedup["+s"] >= 10.0
        assert report.speedup["+a"] >= 10.0

    def test_noise_standard_deviation(self):
        """Per-coordinate pixel noise matches the recipe sigma over 10^4 observations."""
        problem = generate(SceneRecipe(num_points=5000, noise_sigma_px=0.5, seed=13))
        errors = reprojection_errors(problem.ground_truth, problem.correspondences, problem.rig)
        assert 0.45 <= np.sqrt(np.mean(errors ** 2) / 2.0) <= 0.55


if __name__ == '__main__':
    pytest.main()
