"""
Synthetic scenes and the benchmark runners built on them.

Scenes follow the usual synthetic protocol for generalized pose-and-scale:
points in a cube (or on a plane), a rig of pinhole cameras above them looking
at the cloud, pixel noise, and outliers re-pointed to random pixels. World
points are the rig-frame points mapped through the inverse ground truth, so
the ground truth maps world to rig.
"""
import dataclasses
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.spatial.transform import Rotation as SciRotation

from .alignment import PointPairSet, similarity_from_affine_inliers
from .config import BENCH_CONFIG, DEFAULT_THREADS, RANSAC_CONFIG, SCENE_CONFIG
from .core_types import (Correspondence, GeneralizedCamera, PinholeCamera, SimilarityTransform,
                         backproject, invert_similarity, look_at)
from .errors import DegenerateConfiguration, EstimationFailure, NoHypothesis
from .pipeline import (Alignment, Hypothesis, HypothesisKind, SolverPath, SolverVariant,
                       count_valid_solutions, solve_minimal)
from .robust import RansacConfig, estimate, reprojection_errors

logger = logging.getLogger(__name__)

T = TypeVar("T")

COPLANAR_SQUARE_SIDE = 6.0
COPLANAR_OFFSET = 1.5
MAX_CAMERA_TRIES = 100
RELATIVE_EPS = 1e-9


class TransformKind(str, Enum):
    IDENTITY = "identity"
    RANDOM_SIMILARITY = "random"


@dataclass(frozen=True)
class SceneRecipe:
    num_points: int = SCENE_CONFIG['num_points']
    point_cube: Tuple[float, float] = SCENE_CONFIG['point_cube']
    num_cameras: int = SCENE_CONFIG['num_cameras']
    camera_box: Tuple[Tuple[float, float], ...] = SCENE_CONFIG['camera_box']
    focal_length: float = SCENE_CONFIG['focal_length']
    image_size: Tuple[int, int] = SCENE_CONFIG['image_size']
    noise_sigma_px: float = 0.0
    outlier_fraction: float = 0.0
    transform: TransformKind = TransformKind.RANDOM_SIMILARITY
    coplanar: bool = False
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.point_cube
        if not hi > lo:
            raise ValueError("Point cube must have positive extent")
        if any(not b > a for a, b in self.camera_box):
            raise ValueError("Camera box must have positive extent on every axis")
        if self.num_points < 4:
            raise ValueError("A scene needs at least 4 points")
        if self.num_cameras < 1:
            raise ValueError("A scene needs at least one camera")
        if self.noise_sigma_px < 0.0:
            raise ValueError("Noise sigma must be non-negative")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("Outlier fraction must lie in [0, 1)")


@dataclass(frozen=True)
class SyntheticProblem:
    correspondences: List[Correspondence]
    rig: GeneralizedCamera
    ground_truth: SimilarityTransform
    depths: np.ndarray
    inlier_mask: np.ndarray
    recipe: SceneRecipe

    @property
    def inlier_indices(self) -> np.ndarray:
        return np.flatnonzero(self.inlier_mask)


@dataclass(frozen=True)
class ErrorReport:
    rotation_error_deg: float
    translation_error: float
    translation_error_rel: float
    scale_error: float
    position_error: float
    mean_reprojection_px: float
    inlier_count: int
    depth_rmse: float

    def as_row(self) -> Dict[str, float]:
        return dataclasses.asdict(self)


def derive_seed(*parts: int) -> int:
    """A 32-bit seed for the stream identified by parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _parallel_map(func: Callable[[int], T], count: int, threads: int) -> List[T]:
    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(func, range(count)))
    return [func(i) for i in range(count)]


def random_similarity(rng: np.random.Generator) -> SimilarityTransform:
    """Uniform rotation, log-uniform scale and uniform translation from the scene config."""
    rotation = SciRotation.from_quat(rng.standard_normal(4)).as_matrix()
    lo, hi = SCENE_CONFIG['scale_range']
    scale = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    t_lo, t_hi = SCENE_CONFIG['translation_range']
    return SimilarityTransform(scale, rotation, rng.uniform(t_lo, t_hi, 3))


def _point_sampler(recipe: SceneRecipe, rng: np.random.Generator) -> Callable[[int], np.ndarray]:
    """Draws rig-frame points from the cube, or from one fixed random square plane."""
    lo, hi = recipe.point_cube
    if not recipe.coplanar:
        return lambda count: rng.uniform(lo, hi, (count, 3))
    half = COPLANAR_SQUARE_SIDE / 2.0
    rotation = SciRotation.from_quat(rng.standard_normal(4)).as_matrix()
    offset = rng.uniform(-COPLANAR_OFFSET, COPLANAR_OFFSET, 3)

    def draw(count: int) -> np.ndarray:
        flat = np.column_stack([rng.uniform(-half, half, (count, 2)), np.zeros(count)])
        return flat @ rotation.T + offset
    return draw


def _make_rig(recipe: SceneRecipe, rng: np.random.Generator, target: np.ndarray) -> GeneralizedCamera:
    width, height = recipe.image_size
    cameras = []
    for _ in range(recipe.num_cameras):
        center = np.array([rng.uniform(a, b) for a, b in recipe.camera_box])
        up = rng.standard_normal(3)
        cameras.append(PinholeCamera(center, look_at(center, target, up), recipe.focal_length, width, height))
    return GeneralizedCamera(tuple(cameras))


def _try_observe(camera: PinholeCamera, point: np.ndarray) -> Optional[np.ndarray]:
    local = camera.to_camera_frame(point)
    if local[2] <= 0.0:
        return None
    pixel = camera.focal_length * local[:2] / local[2] + camera.principal_point
    return pixel if camera.in_image(pixel) else None


def generate(recipe: SceneRecipe) -> SyntheticProblem:
    """
    Build one synthetic problem; points no camera can see are redrawn.

    Args:
        recipe: scene layout, noise, outliers, transform kind and seed

    Returns:
        SyntheticProblem: correspondences, rig, ground truth, true depths and inlier mask
    """
    rng = np.random.default_rng(recipe.seed)
    draw_points = _point_sampler(recipe, rng)
    points = draw_points(recipe.num_points)
    rig = _make_rig(recipe, rng, points.mean(axis=0))
    truth = (random_similarity(rng) if recipe.transform == TransformKind.RANDOM_SIMILARITY
             else SimilarityTransform.identity())

    camera_indices = np.empty(recipe.num_points, dtype=int)
    clean_pixels = np.empty((recipe.num_points, 2))
    for i in range(recipe.num_points):
        for attempt in range(MAX_CAMERA_TRIES):
            ci = int(rng.integers(len(rig)))
            pixel = _try_observe(rig.cameras[ci], points[i])
            if pixel is not None:
                break
            if attempt % 10 == 9:
                points[i] = draw_points(1)[0]
        else:
            raise RuntimeError("Could not place a visible point; check the camera box and point cube")
        camera_indices[i] = ci
        clean_pixels[i] = pixel

    pixels = clean_pixels + rng.normal(0.0, recipe.noise_sigma_px, clean_pixels.shape)
    inlier_mask = np.ones(recipe.num_points, dtype=bool)
    num_outliers = int(round(recipe.outlier_fraction * recipe.num_points))
    if num_outliers:
        outliers = rng.choice(recipe.num_points, size=num_outliers, replace=False)
        width, height = recipe.image_size
        pixels[outliers] = rng.uniform([0.0, 0.0], [width, height], (num_outliers, 2))
        inlier_mask[outliers] = False

    world = invert_similarity(truth).apply(points)
    centers = np.array([rig.cameras[ci].center for ci in camera_indices])
    correspondences = [
        Correspondence(world[i], backproject(rig.cameras[ci], pixels[i]), int(ci), pixels[i])
        for i, ci in enumerate(camera_indices)
    ]
    return SyntheticProblem(
        correspondences=correspondences,
        rig=rig,
        ground_truth=truth,
        depths=np.linalg.norm(points - centers, axis=1),
        inlier_mask=inlier_mask,
        recipe=recipe,
    )


def rotation_angle_deg(rotation: np.ndarray) -> float:
    """Angle of a rotation matrix in degrees, stable near 0 and 180."""
    skew = rotation - rotation.T
    sin_part = 0.5 * np.linalg.norm([skew[2, 1], skew[0, 2], skew[1, 0]])
    cos_part = 0.5 * (np.trace(rotation) - 1.0)
    return float(np.degrees(np.arctan2(sin_part, cos_part)))


def rig_origin_in_world(transform: SimilarityTransform) -> np.ndarray:
    return invert_similarity(transform).translation


def error_report(estimated: SimilarityTransform, truth: SimilarityTransform,
                 problem: Optional[SyntheticProblem] = None,
                 depths: Optional[np.ndarray] = None,
                 indices: Optional[Sequence[int]] = None,
                 inlier_threshold_px: float = RANSAC_CONFIG['inlier_threshold_px']) -> ErrorReport:
    """
    Transform errors of ``estimated`` against ``truth``. With a problem, also
    reprojection, inlier and depth errors over its true inliers, or over
    ``indices`` when given (then ``depths`` may hold estimated depths for them).

    Args:
        estimated: similarity under test
        truth: ground-truth similarity
        problem: scene for the reprojection, inlier and depth errors
        depths: estimated depths for ``indices``
        indices: correspondences to report on instead of the true inliers
        inlier_threshold_px: threshold for ``inlier_count``

    Returns:
        ErrorReport: zeros in the problem fields when no problem is given
    """
    translation_error = float(np.linalg.norm(estimated.translation - truth.translation))
    report = dict(
        rotation_error_deg=rotation_angle_deg(estimated.rotation @ truth.rotation.T),
        translation_error=translation_error,
        translation_error_rel=translation_error / max(float(np.linalg.norm(truth.translation)), RELATIVE_EPS),
        scale_error=abs(estimated.scale - truth.scale) / truth.scale,
        position_error=float(np.linalg.norm(rig_origin_in_world(estimated) - rig_origin_in_world(truth))),
        mean_reprojection_px=0.0,
        inlier_count=0,
        depth_rmse=0.0,
    )
    if problem is not None:
        idx = problem.inlier_indices if indices is None else np.asarray(indices, dtype=int)
        subset = [problem.correspondences[i] for i in idx]
        errors = reprojection_errors(estimated, subset, problem.rig)
        if depths is None:
            mapped = estimated.apply(np.array([c.world_point for c in subset]))
            depths = np.array([c.ray.closest_depth(y) for c, y in zip(subset, mapped)])
        report.update(
            mean_reprojection_px=float(errors.mean()),
            inlier_count=int(np.sum(errors <= inlier_threshold_px)),
            depth_rmse=float(np.sqrt(np.mean((np.asarray(depths) - problem.depths[idx]) ** 2))),
        )
    return ErrorReport(**report)


def hypothesis_similarity(hypothesis: Hypothesis, sample: Sequence[Correspondence]) -> SimilarityTransform:
    """The similarity a hypothesis implies; affine hypotheses go through their lifted points."""
    if hypothesis.kind == HypothesisKind.SIMILARITY:
        return hypothesis.transform
    lifted = np.array([c.ray.point_at(s) for c, s in zip(sample, hypothesis.depths)])
    return similarity_from_affine_inliers(PointPairSet(np.array([c.world_point for c in sample]), lifted))


def best_hypothesis(hypotheses: Sequence[Hypothesis], true_depths: np.ndarray) -> Tuple[Hypothesis, float]:
    """The hypothesis closest to the true depths, and its depth RMSE."""
    rmses = [float(np.sqrt(np.mean((h.depths - true_depths) ** 2))) for h in hypotheses]
    k = int(np.argmin(rmses))
    return hypotheses[k], rmses[k]


@dataclass
class StabilityReport:
    rows: List[Dict[str, float]] = field(default_factory=list)

    @property
    def cdf(self) -> np.ndarray:
        """Sorted best-hypothesis depth RMSE, one per trial."""
        return np.sort([row['depth_rmse'] for row in self.rows])

    def fraction_below(self, threshold: float) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean(self.cdf <= threshold))


def run_stability(trials: int = BENCH_CONFIG['stability_trials'], recipe: Optional[SceneRecipe] = None,
                  seed: int = 0, variant: Optional[SolverVariant] = None,
                  threads: int = DEFAULT_THREADS) -> StabilityReport:
    """Noise-free minimal problems: best-hypothesis depth RMSE and transform errors per trial."""
    recipe = recipe or SceneRecipe(transform=TransformKind.IDENTITY)
    variant = variant or SolverVariant()
    logger.info(f"Stability run: {trials} trials, {variant.label}, coplanar={recipe.coplanar}")

    def trial(index: int) -> Dict[str, float]:
        problem = generate(dataclasses.replace(recipe, num_points=4, noise_sigma_px=0.0,
                                               outlier_fraction=0.0, seed=derive_seed(seed, index)))
        row = dict(trial=index, num_solutions=0, path="", depth_rmse=float('inf'),
                   rotation_error_deg=float('inf'), translation_error=float('inf'), scale_error=float('inf'))
        try:
            hypotheses = solve_minimal(problem.correspondences, variant, seed=seed)
        except NoHypothesis as e:
            logger.debug(f"Stability trial {index} failed: {e}")
            return row
        best, rmse = best_hypothesis(hypotheses, problem.depths)
        try:
            report = error_report(hypothesis_similarity(best, problem.correspondences), problem.ground_truth)
        except DegenerateConfiguration as e:
            logger.debug(f"Stability trial {index}: no similarity from best hypothesis: {e}")
            report = None
        row.update(num_solutions=len(hypotheses), path=best.path.value, depth_rmse=rmse)
        if report is not None:
            row.update(rotation_error_deg=report.rotation_error_deg,
                       translation_error=report.translation_error, scale_error=report.scale_error)
        return row

    report = StabilityReport(_parallel_map(trial, trials, threads))
    logger.info(f"Stability run finished: {report.fraction_below(1e-2):.1%} of trials with depth RMSE <= 1e-2")
    return report


REPORT_FIELDS = [f.name for f in dataclasses.fields(ErrorReport)]


def _mean_rows(level_row: Dict[str, float], reports: List[Optional[ErrorReport]]) -> Dict[str, float]:
    ok = [r for r in reports if r is not None]
    row = dict(level_row, runs=len(reports), failures=len(reports) - len(ok))
    for name in REPORT_FIELDS:
        row[name] = float(np.mean([getattr(r, name) for r in ok])) if ok else float('nan')
    return row


def _ransac_trial(problem: SyntheticProblem, config: RansacConfig) -> Optional[ErrorReport]:
    try:
        result = estimate(problem.correspondences, problem.rig, config)
    except EstimationFailure as e:
        logger.debug(f"RANSAC failed: {e}")
        return None
    return error_report(result.transform, problem.ground_truth, problem,
                        inlier_threshold_px=config.inlier_threshold_px)


def _minimal_trial(problem: SyntheticProblem, variant: SolverVariant, seed: int) -> Optional[ErrorReport]:
    if problem.inlier_mask.sum() < 4:
        return None
    rng = np.random.default_rng(seed)
    idx = rng.choice(problem.inlier_indices, size=4, replace=False)
    sample = [problem.correspondences[i] for i in idx]
    try:
        hypotheses = solve_minimal(sample, variant, seed=seed)
        best, _ = best_hypothesis(hypotheses, problem.depths[idx])
        similarity = hypothesis_similarity(best, sample)
    except (NoHypothesis, DegenerateConfiguration) as e:
        logger.debug(f"Minimal solve failed: {e}")
        return None
    return error_report(similarity, problem.ground_truth, problem, depths=best.depths, indices=idx)


def run_noise_sweep(levels: Sequence[float] = tuple(BENCH_CONFIG['noise_levels']),
                    recipe: Optional[SceneRecipe] = None,
                    runs: int = BENCH_CONFIG['runs_per_level'], seed: int = 0,
                    variant: Optional[SolverVariant] = None,
                    iterations: int = RANSAC_CONFIG['iterations'],
                    threads: int = DEFAULT_THREADS) -> List[Dict[str, float]]:
    """Mean ErrorReport per noise level, for the full RANSAC pipeline and for raw minimal solves."""
    recipe = recipe or SceneRecipe()
    variant = variant or SolverVariant()
    config = RansacConfig(iterations=iterations, seed=seed, variant=variant, threads=1)
    rows = []
    for li, sigma in enumerate(levels):
        logger.info(f"Noise sweep: sigma={sigma} px, {runs} runs")

        def trial(run: int):
            run_seed = derive_seed(seed, li, run)
            problem = generate(dataclasses.replace(recipe, noise_sigma_px=float(sigma), seed=run_seed))
            return _ransac_trial(problem, config), _minimal_trial(problem, variant, run_seed)

        results = _parallel_map(trial, runs, threads)
        base = dict(noise_sigma_px=float(sigma), outlier_fraction=recipe.outlier_fraction)
        rows.append(_mean_rows(dict(base, method="ransac"), [r[0] for r in results]))
        rows.append(_mean_rows(dict(base, method="minimal"), [r[1] for r in results]))
    return rows


def run_ransac_sweep(outlier_levels: Sequence[float] = tuple(BENCH_CONFIG['outlier_levels']),
                     noise_levels: Sequence[float] = (1.0,),
                     recipe: Optional[SceneRecipe] = None,
                     runs: int = BENCH_CONFIG['runs_per_level'], seed: int = 0,
                     variants: Optional[Sequence[SolverVariant]] = None,
                     iterations: int = RANSAC_CONFIG['iterations'],
                     threads: int = DEFAULT_THREADS) -> List[Dict[str, float]]:
    """
    RANSAC under outliers and noise for each variant. A run succeeds with
    inlier recall >= 0.9 and rotation error < 1 degree.
    """
    recipe = recipe or SceneRecipe()
    variants = variants or (SolverVariant(alignment=Alignment.PLUS_S), SolverVariant(alignment=Alignment.PLUS_A))
    rows = []
    for oi, outliers in enumerate(outlier_levels):
        for ni, sigma in enumerate(noise_levels):
            for variant in variants:
                logger.info(f"RANSAC sweep: {variant.label}, outliers={outliers}, sigma={sigma}")
                config = RansacConfig(iterations=iterations, seed=seed, variant=variant, threads=1)

                def trial(run: int):
                    problem = generate(dataclasses.replace(
                        recipe, noise_sigma_px=float(sigma), outlier_fraction=float(outliers),
                        seed=derive_seed(seed, oi, ni, run)))
                    report = _ransac_trial(problem, config)
                    if report is None:
                        return None, 0.0, False
                    recall = report.inlier_count / max(int(problem.inlier_mask.sum()), 1)
                    return report, recall, recall >= 0.9 and report.rotation_error_deg < 1.0

                results = _parallel_map(trial, runs, threads)
                row = _mean_rows(dict(variant=variant.label, outlier_fraction=float(outliers),
                                      noise_sigma_px=float(sigma)), [r[0] for r in results])
                row['mean_recall'] = float(np.mean([r[1] for r in results])) if results else float('nan')
                row['success_rate'] = float(np.mean([r[2] for r in results])) if results else float('nan')
                rows.append(row)
    return rows


@dataclass
class TimingReport:
    rows: List[Dict[str, float]] = field(default_factory=list)
    speedup: Dict[str, float] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.rows


def run_timing(recipe: Optional[SceneRecipe] = None, trials: int = BENCH_CONFIG['timing_trials'],
               seed: int = 0, warmup: int = BENCH_CONFIG['timing_warmup']) -> TimingReport:
    """
    Per-problem solve time of the coplanar and general paths on the same
    coplanar minimal problems, for both alignment variants.
    """
    report = TimingReport()
    if trials <= 0:
        return report
    recipe = dataclasses.replace(recipe or SceneRecipe(), num_points=4, coplanar=True,
                                 noise_sigma_px=0.0, outlier_fraction=0.0)
    samples = [generate(dataclasses.replace(recipe, seed=derive_seed(seed, t))).correspondences
               for t in range(trials)]

    for alignment in Alignment:
        medians = {}
        for path in SolverPath:
            variant = SolverVariant(alignment=alignment, use_coplanar_solver=path == SolverPath.COPLANAR)
            for sample in samples[:warmup]:
                count_valid_solutions(sample, variant, seed)
            times, counts = [], []
            for sample in samples:
                tic = time.perf_counter()
                counts.append(count_valid_solutions(sample, variant, seed))
                times.append((time.perf_counter() - tic) * 1e6)
            medians[path] = statistics.median(times)
            report.rows.append(dict(
                variant=variant.label, path=path.value, trials=trials,
                mean_us=float(np.mean(times)), median_us=medians[path],
                mean_solutions=float(np.mean(counts)), total_solutions=int(np.sum(counts)),
            ))
            logger.info(f"Timing {variant.label} {path.value}: median {medians[path]:.1f} us")
        report.speedup[alignment.value] = medians[SolverPath.GENERAL] / medians[SolverPath.COPLANAR]
    return report

