"""
Tests for scene and result JSON files.
"""
import json
from pathlib import Path

import numpy as np
import pytest

from gp4pc.errors import SceneFormatError
from gp4pc.scene_io import (Diagnostics, ResultFile, SceneDocument, dumps_strict, load_result, load_scene,
                            result_json_schema, save_result, save_scene, scene_json_schema, similarity_to_model,
                            strict_json)
from gp4pc.synthbench import SceneRecipe, generate

DOCS_DIR = Path(__file__).resolve().parent.parent / "docs"


def reject_constant(name):
    raise ValueError(f"non-standard JSON constant {name}")


@pytest.fixture
def scene_path(tmp_path):
    problem = generate(SceneRecipe(num_points=8, outlier_fraction=0.25, seed=1))
    path = tmp_path / "scene.json"
    save_scene(str(path), SceneDocument(problem.rig, problem.correspondences,
                                        problem.ground_truth, problem.inlier_mask))
    return path, problem


def rewrite(path, edit):
    payload = json.loads(path.read_text())
    edit(payload)
    path.write_text(json.dumps(payload))


class TestScene:
    def test_save_and_load(self, scene_path):
        path, problem = scene_path
        document = load_scene(str(path))
        assert len(document.correspondences) == 8
        assert len(document.rig) == len(problem.rig)
        np.testing.assert_allclose(document.ground_truth.rotation, problem.ground_truth.rotation)
        np.testing.assert_array_equal(document.inlier_mask, problem.inlier_mask)
        for loaded, original in zip(document.correspondences, problem.correspondences):
            np.testing.assert_allclose(loaded.ray.direction, original.ray.direction, atol=1e-12)

    def test_no_temporary_files_left(self, scene_path):
        path, _ = scene_path
        assert [p.name for p in path.parent.iterdir()] == ["scene.json"]

    def test_unknown_field(self, scene_path):
        path, _ = scene_path
        rewrite(path, lambda p: p.update(extra="nope"))
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_wrong_version(self, scene_path):
        path, _ = scene_path
        rewrite(path, lambda p: p.update(version=2))
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_camera_index_out_of_range(self, scene_path):
        path, _ = scene_path
        rewrite(path, lambda p: p["correspondences"][0].update(camera_index=99))
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_mask_length_mismatch(self, scene_path):
        path, _ = scene_path
        rewrite(path, lambda p: p.update(inlier_mask=[True]))
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_non_rotation_orientation(self, scene_path):
        path, _ = scene_path
        rewrite(path, lambda p: p["cameras"][0].update(orientation=[[2, 0, 0], [0, 1, 0], [0, 0, 1]]))
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SceneFormatError):
            load_scene(str(tmp_path / "absent.json"))


class TestResult:
    def test_save_and_load(self, tmp_path, scene_path):
        _, problem = scene_path
        result = ResultFile(
            transform=similarity_to_model(problem.ground_truth),
            inlier_indices=[0, 2, 3],
            residuals=[0.1, 5.0, 0.2, 0.3],
            diagnostics=Diagnostics(variant="gP4Pc+s(1p)", iterations=10, best_path="general",
                                    best_kind="similarity", minimal_problems=10, failed_problems=1,
                                    hypotheses_scored=30, solutions_per_problem=3.33,
                                    solver_seconds=0.5, total_seconds=0.6),
        )
        path = tmp_path / "result.json"
        save_result(str(path), result)
        assert load_result(str(path)) == result

    def test_non_finite_residuals_written_as_null(self, tmp_path, scene_path):
        _, problem = scene_path
        result = ResultFile(
            transform=similarity_to_model(problem.ground_truth),
            inlier_indices=[0],
            residuals=[0.1, float('inf'), None],
            diagnostics=Diagnostics(variant="gP4Pc+s(1p)", iterations=1, best_path="general",
                                    best_kind="similarity", minimal_problems=1, failed_problems=0,
                                    hypotheses_scored=1, solutions_per_problem=1.0,
                                    solver_seconds=0.0, total_seconds=0.0),
        )
        path = tmp_path / "result.json"
        save_result(str(path), result)
        text = path.read_text()
        assert "Infinity" not in text
        assert json.loads(text, parse_constant=reject_constant)["residuals"] == [0.1, None, None]
        assert load_result(str(path)).residuals == [0.1, None, None]

    def test_non_standard_constants_rejected(self, tmp_path):
        path = tmp_path / "result.json"
        path.write_text('{"residuals": [Infinity]}')
        with pytest.raises(SceneFormatError):
            load_result(str(path))


class TestStrictJson:
    def test_nested_values(self):
        payload = {"a": float('nan'), "b": [1.0, float('-inf'), np.float64(2.5)], "c": (np.int64(3), "x")}
        assert strict_json(payload) == {"a": None, "b": [1.0, None, 2.5], "c": [3, "x"]}

    def test_dumps_strict_is_standard_json(self):
        text = dumps_strict({"median_depth_rmse": float('inf'), "rows": [{"mean_us": float('nan')}]})
        assert json.loads(text, parse_constant=reject_constant) == {"median_depth_rmse": None,
                                                                    "rows": [{"mean_us": None}]}


class TestSchemas:
    def test_scene_schema(self):
        schema = scene_json_schema()
        assert schema["additionalProperties"] is False
        assert set(schema["required"]) == {"cameras", "correspondences"}

    def test_result_schema(self):
        schema = result_json_schema()
        assert {"transform", "inlier_indices", "residuals", "diagnostics"} <= set(schema["properties"])

    @pytest.mark.parametrize("name, generator", [("scene", scene_json_schema), ("result", result_json_schema)])
    def test_shipped_copies_match_models(self, name, generator):
        """The schema files in docs/ list the same fields as the models."""
        with open(DOCS_DIR / f"{name}.schema.json") as f:
            shipped = json.load(f)
        generated = generator()
        assert set(shipped["properties"]) == set(generated["properties"])
        assert set(shipped["required"]) == set(generated["required"])
        assert set(shipped["$defs"]) == set(generated["$defs"])


if __name__ == '__main__':
    pytest.main()
