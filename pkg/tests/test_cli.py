"""
Tests for the gp4pc command line.
"""
import csv
import json
from unittest.mock import patch

import numpy as np
import pytest

from gp4pc.cli import EXIT_ESTIMATION_FAILURE, EXIT_INPUT_ERROR, EXIT_OK, main, write_csv
from gp4pc.errors import EstimationFailure
from gp4pc.scene_io import load_result


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.json"
    assert main(["generate", "--out", str(path), "--points", "20", "--outliers", "0.25", "--seed", "3"]) == EXIT_OK
    return path


class TestGenerateAndSolve:
    def test_solve_generated_scene(self, tmp_path, scene_file):
        out = tmp_path / "result.json"
        code = main(["--threads", "1", "solve", str(scene_file), "--out", str(out), "--iterations", "50"])
        assert code == EXIT_OK
        result = load_result(str(out))
        truth = json.loads(scene_file.read_text())
        mask = truth["inlier_mask"]
        assert {i for i, inlier in enumerate(mask) if inlier} <= set(result.inlier_indices)
        assert len(result.residuals) == 20
        assert result.diagnostics.variant == "gP4Pc+s(1p)"
        assert result.transform.scale == pytest.approx(truth["ground_truth"]["scale"], rel=1e-6)

    def test_affine_variant(self, tmp_path, scene_file):
        out = tmp_path / "result.json"
        code = main(["--threads", "1", "solve", str(scene_file), "--out", str(out), "--iterations", "50",
                     "--variant", "plus-a", "--permutations", "6"])
        assert code == EXIT_OK
        assert load_result(str(out)).diagnostics.variant == "gP4Pc+a(6p)"

    def test_residuals_are_standard_json(self, tmp_path, scene_file):
        """Points mapped behind their camera get a null residual."""
        out = tmp_path / "result.json"
        with patch("gp4pc.cli.reprojection_errors", return_value=np.array([0.5] * 19 + [np.inf])):
            code = main(["--threads", "1", "solve", str(scene_file), "--out", str(out), "--iterations", "10"])
        assert code == EXIT_OK
        text = out.read_text()
        assert "Infinity" not in text
        assert json.loads(text)["residuals"][-1] is None

    def test_estimation_failure(self, tmp_path, scene_file):
        with patch("gp4pc.cli.estimate", side_effect=EstimationFailure("no consensus")):
            code = main(["solve", str(scene_file), "--out", str(tmp_path / "result.json")])
        assert code == EXIT_ESTIMATION_FAILURE
        assert not (tmp_path / "result.json").exists()

    def test_generate_is_deterministic(self, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for path in (first, second):
            assert main(["generate", "--out", str(path), "--points", "12", "--coplanar", "--seed", "5"]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()


class TestInputErrors:
    def test_malformed_scene(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text('{"version": 1, "cameras": []}')
        assert main(["solve", str(path), "--out", str(tmp_path / "r.json")]) == EXIT_INPUT_ERROR

    def test_too_few_correspondences(self, tmp_path, scene_file):
        payload = json.loads(scene_file.read_text())
        payload["correspondences"] = payload["correspondences"][:3]
        payload["inlier_mask"] = payload["inlier_mask"][:3]
        scene_file.write_text(json.dumps(payload))
        assert main(["solve", str(scene_file), "--out", str(tmp_path / "r.json")]) == EXIT_INPUT_ERROR

    def test_invalid_recipe(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path / "s.json"), "--outliers", "1.5"]) == EXIT_INPUT_ERROR

    def test_bad_thread_count(self, tmp_path, scene_file):
        with pytest.raises(SystemExit):
            main(["--threads", "0", "solve", str(scene_file), "--out", str(tmp_path / "r.json")])


class TestSchemaAndBench:
    def test_schema_to_stdout(self, capsys):
        assert main(["schema", "scene"]) == EXIT_OK
        schema = json.loads(capsys.readouterr().out)
        assert "cameras" in schema["properties"]

    def test_schema_to_file(self, tmp_path):
        out = tmp_path / "result.schema.json"
        assert main(["schema", "result", "--out", str(out)]) == EXIT_OK
        assert "diagnostics" in json.loads(out.read_text())["properties"]

    def test_bench_timing_without_trials(self, tmp_path):
        code = main(["bench", "timing", "--out", str(tmp_path), "--timing-trials", "0"])
        assert code == EXIT_OK
        assert (tmp_path / "timing.csv").read_text() == ""
        summary = json.loads((tmp_path / "timing_summary.json").read_text())
        assert summary["rows"] == []

    def test_bench_stability(self, tmp_path):
        code = main(["--threads", "1", "bench", "stability", "--out", str(tmp_path), "--trials", "3"])
        assert code == EXIT_OK
        with open(tmp_path / "stability.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 3
        assert json.loads((tmp_path / "stability_summary.json").read_text())["trials"] == 3

    def test_bench_summary_is_standard_json(self, tmp_path):
        """A failed trial's infinite RMSE is written as null, never as Infinity."""
        with patch("gp4pc.cli.run_stability") as fake:
            fake.return_value.rows = [dict(trial=0, num_solutions=0, path="", depth_rmse=float('inf'))]
            fake.return_value.cdf = [float('inf')]
            fake.return_value.fraction_below.return_value = 0.0
            assert main(["bench", "stability", "--out", str(tmp_path), "--trials", "1"]) == EXIT_OK
        text = (tmp_path / "stability_summary.json").read_text()
        assert "Infinity" not in text
        assert json.loads(text)["median_depth_rmse"] is None

    def test_bench_ransac_with_zero_outliers(self, tmp_path):
        code = main(["--threads", "1", "bench", "ransac", "--out", str(tmp_path), "--outliers", "0",
                     "--runs", "1", "--iterations", "10", "--points", "12"])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "ransac_summary.json").read_text())
        assert summary["outlier_levels"] == [0.0]
        assert [row["outlier_fraction"] for row in summary["rows"]] == [0.0, 0.0]


def test_write_csv_quotes_and_crlf(tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(str(path), [{"variant": "gP4Pc+s(1p)", "note": "a,b"}])
    assert path.read_bytes() == b'variant,note\r\ngP4Pc+s(1p),"a,b"\r\n'


if __name__ == '__main__':
    pytest.main()
