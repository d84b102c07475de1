"""
Command-line interface: solve scene files, generate synthetic scenes, run benchmarks.

Exit codes: 0 success, 1 input error, 2 estimation failure.
"""
import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import tempfile
from typing import Any, Dict, List, Optional, Sequence

from .config import BENCH_CONFIG, DEFAULT_THREADS, RANSAC_CONFIG, SCENE_CONFIG, configure_logging
from .errors import EstimationFailure, SceneFormatError
from .pipeline import Alignment, Permutations, SolverVariant
from .quartic_system import SolveOptions
from .robust import RansacConfig, estimate, reprojection_errors
from .scene_io import (Diagnostics, ResultFile, SceneDocument, dumps_strict, load_scene, result_json_schema,
                       save_result, save_scene, scene_json_schema, similarity_to_model)
from .synthbench import (SceneRecipe, TransformKind, generate, run_noise_sweep, run_ransac_sweep,
                         run_stability, run_timing)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_ESTIMATION_FAILURE = 2

VARIANT_CHOICES = {"plus-s": Alignment.PLUS_S, "plus-a": Alignment.PLUS_A}
PERMUTATION_CHOICES = {"1": Permutations.ONE, "6": Permutations.SIX}

BENCH_HELP = """\
Outputs (under --out):
  stability  stability.csv    trial,num_solutions,path,depth_rmse,rotation_error_deg,translation_error,scale_error
  noise      noise.csv        noise_sigma_px,outlier_fraction,method,runs,failures,<error report fields>
  ransac     ransac.csv       variant,outlier_fraction,noise_sigma_px,runs,failures,<error report fields>,
                              mean_recall,success_rate
  coplanar   coplanar.csv     stability columns on coplanar scenes; summary adds timing and speedup
  timing     timing.csv       variant,path,trials,mean_us,median_us,mean_solutions,total_solutions
Every benchmark also writes <name>_summary.json.
"""


def _variant_from_args(args: argparse.Namespace) -> SolverVariant:
    return SolverVariant(
        alignment=VARIANT_CHOICES[args.variant],
        permutations=PERMUTATION_CHOICES[args.permutations],
        solve_options=SolveOptions(backend=args.backend),
    )


def _recipe_from_args(args: argparse.Namespace, **overrides) -> SceneRecipe:
    values = dict(
        num_points=args.points,
        num_cameras=args.cameras,
        noise_sigma_px=args.noise,
        outlier_fraction=args.outliers if args.outliers is not None else 0.0,
        transform=TransformKind.IDENTITY if args.identity else TransformKind.RANDOM_SIMILARITY,
        coplanar=args.coplanar,
        seed=args.seed,
    )
    values.update(overrides)
    return SceneRecipe(**values)


def _write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as f:
        f.write(text)
    os.replace(tmp_path, path)


def write_csv(path: str, rows: Sequence[Dict[str, Any]]) -> None:
    """Header row plus one line per row, RFC-4180 quoting."""
    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\r\n")
        writer.writeheader()
        writer.writerows(rows)
    _write_text_atomic(path, buffer.getvalue())


def write_summary(path: str, summary: Dict[str, Any]) -> None:
    """Summary JSON with NaN and infinities written as null."""
    _write_text_atomic(path, dumps_strict(summary, sort_keys=True) + "\n")


def cmd_solve(args: argparse.Namespace) -> int:
    document = load_scene(args.scene)
    if len(document.correspondences) < 4:
        raise SceneFormatError(f"Need at least 4 correspondences, scene has {len(document.correspondences)}")
    variant = _variant_from_args(args)
    config = RansacConfig(iterations=args.iterations, inlier_threshold_px=args.threshold_px,
                          seed=args.seed, variant=variant, threads=args.threads, record_history=False)
    result = estimate(document.correspondences, document.rig, config)
    residuals = reprojection_errors(result.transform, document.correspondences, document.rig)
    stats = result.stats
    output = ResultFile(
        transform=similarity_to_model(result.transform),
        inlier_indices=[int(i) for i in result.inlier_indices],
        residuals=[float(r) if math.isfinite(r) else None for r in residuals],
        diagnostics=Diagnostics(
            variant=variant.label,
            iterations=result.iterations_run,
            best_path=result.best_hypothesis.path.value,
            best_kind=result.best_hypothesis_kind.value,
            minimal_problems=stats.minimal_problems,
            failed_problems=stats.failed_problems,
            hypotheses_scored=stats.hypotheses_scored,
            solutions_per_problem=stats.solutions_per_problem,
            solver_seconds=stats.solver_seconds,
            total_seconds=stats.total_seconds,
        ),
    )
    save_result(args.out, output)
    print(f"{len(result.inlier_indices)}/{len(document.correspondences)} inliers; result written to {args.out}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    problem = generate(_recipe_from_args(args))
    save_scene(args.out, SceneDocument(problem.rig, problem.correspondences,
                                       problem.ground_truth, problem.inlier_mask))
    print(f"Scene with {len(problem.correspondences)} correspondences written to {args.out}")
    return EXIT_OK


def _stability_summary(report, trials: int) -> Dict[str, Any]:
    cdf = report.cdf
    return {
        "trials": trials,
        "fraction_depth_rmse_le_1e-2": report.fraction_below(1e-2),
        "median_depth_rmse": float(cdf[len(cdf) // 2]) if len(cdf) else None,
        "mean_solutions": (sum(r["num_solutions"] for r in report.rows) / len(report.rows)) if report.rows else None,
    }


def _timing_summary(report) -> Dict[str, Any]:
    return {"rows": report.rows, "speedup": report.speedup}


def cmd_bench(args: argparse.Namespace) -> int:
    variant = _variant_from_args(args)
    name = args.benchmark
    summary: Dict[str, Any] = {"benchmark": name, "seed": args.seed, "variant": variant.label}
    rows: List[Dict[str, Any]]

    if name == "stability":
        recipe = _recipe_from_args(args, transform=TransformKind.IDENTITY)
        report = run_stability(args.trials, recipe, args.seed, variant, args.threads)
        rows = report.rows
        summary.update(_stability_summary(report, args.trials))
    elif name == "noise":
        levels = args.levels or BENCH_CONFIG['noise_levels']
        rows = run_noise_sweep(levels, _recipe_from_args(args), args.runs, args.seed, variant,
                               args.iterations, args.threads)
        summary["levels"] = list(levels)
    elif name == "ransac":
        outliers = [args.outliers] if args.outliers is not None else BENCH_CONFIG['outlier_levels']
        noise = [args.noise]
        rows = run_ransac_sweep(outliers, noise, _recipe_from_args(args, outlier_fraction=0.0, noise_sigma_px=0.0),
                                args.runs, args.seed, [dataclasses.replace(variant, alignment=a) for a in Alignment],
                                args.iterations, args.threads)
        summary.update(outlier_levels=list(outliers), noise_levels=noise, rows=rows)
    elif name == "coplanar":
        recipe = _recipe_from_args(args, coplanar=True, transform=TransformKind.IDENTITY)
        report = run_stability(args.trials, recipe, args.seed, variant, args.threads)
        rows = report.rows
        timing = run_timing(recipe, args.timing_trials, args.seed)
        summary.update(_stability_summary(report, args.trials))
        summary.update(timing=_timing_summary(timing), speedup=timing.speedup.get(variant.alignment.value))
    else:
        timing = run_timing(_recipe_from_args(args), args.timing_trials, args.seed)
        rows = timing.rows
        summary.update(_timing_summary(timing))

    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, f"{name}.csv"), rows)
    write_summary(os.path.join(args.out, f"{name}_summary.json"), summary)
    print(f"Benchmark {name}: {len(rows)} rows written to {args.out}")
    return EXIT_OK


def cmd_schema(args: argparse.Namespace) -> int:
    schema = scene_json_schema() if args.kind == "scene" else result_json_schema()
    text = json.dumps(schema, indent=2) + "\n"
    if args.out:
        _write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_variant_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=sorted(VARIANT_CHOICES), default="plus-s",
                        help="Final alignment: similarity (plus-s) or affine then similarity (plus-a)")
    parser.add_argument("--permutations", choices=sorted(PERMUTATION_CHOICES), default="1",
                        help="Point orders solved per minimal sample")
    parser.add_argument("--backend", choices=["homotopy", "macaulay"], default=SolveOptions().backend,
                        help="Quartic system backend")
    parser.add_argument("--seed", type=int, default=RANSAC_CONFIG['seed'], help="Random seed")


def _add_recipe_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--points", type=int, default=SCENE_CONFIG['num_points'], help="Points per scene")
    parser.add_argument("--cameras", type=int, default=SCENE_CONFIG['num_cameras'], help="Cameras per rig")
    parser.add_argument("--noise", type=float, default=0.0, help="Pixel noise sigma")
    parser.add_argument("--outliers", type=float, default=None,
                        help="Outlier fraction in [0, 1); ransac bench sweeps its default levels when unset")
    parser.add_argument("--coplanar", action="store_true", help="Draw points from a plane")
    parser.add_argument("--identity", action="store_true", help="Identity ground truth instead of a random similarity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gp4pc", description="Generalized pose-and-scale from four point pairs")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS,
                        help="Worker threads (default from GP4PC_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Estimate the world-to-rig similarity of a scene file")
    solve.add_argument("scene", help="Scene JSON file")
    solve.add_argument("--out", required=True, help="Result JSON file")
    solve.add_argument("--iterations", type=int, default=RANSAC_CONFIG['iterations'], help="RANSAC iterations")
    solve.add_argument("--threshold-px", type=float, default=RANSAC_CONFIG['inlier_threshold_px'],
                       help="Inlier threshold in pixels")
    _add_variant_flags(solve)
    solve.set_defaults(func=cmd_solve)

    gen = sub.add_parser("generate", help="Write a synthetic scene file")
    gen.add_argument("--out", required=True, help="Scene JSON file")
    _add_recipe_flags(gen)
    gen.add_argument("--seed", type=int, default=0, help="Random seed")
    gen.set_defaults(func=cmd_generate)

    bench = sub.add_parser("bench", help="Run a synthetic benchmark", epilog=BENCH_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    bench.add_argument("benchmark", choices=["stability", "noise", "ransac", "coplanar", "timing"])
    bench.add_argument("--out", required=True, help="Output directory")
    bench.add_argument("--trials", type=int, default=BENCH_CONFIG['stability_trials'],
                       help="Minimal problems for stability and coplanar runs")
    bench.add_argument("--timing-trials", type=int, default=BENCH_CONFIG['timing_trials'],
                       help="Minimal problems timed per solver path")
    bench.add_argument("--runs", type=int, default=BENCH_CONFIG['runs_per_level'], help="Runs per sweep level")
    bench.add_argument("--levels", type=float, nargs="+", help="Noise levels for the noise sweep")
    bench.add_argument("--iterations", type=int, default=RANSAC_CONFIG['iterations'], help="RANSAC iterations")
    _add_recipe_flags(bench)
    _add_variant_flags(bench)
    bench.set_defaults(func=cmd_bench)

    schema = sub.add_parser("schema", help="Print the JSON schema of scene or result files")
    schema.add_argument("kind", choices=["scene", "result"])
    schema.add_argument("--out", help="Write to a file instead of standard output")
    schema.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.debug)
    if args.threads < 1:
        parser.error("--threads must be at least 1")

    try:
        return args.func(args)
    except EstimationFailure as e:
        logger.error(f"Estimation failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ESTIMATION_FAILURE
    except (SceneFormatError, ValueError, OSError) as e:
        logger.error(f"Input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
