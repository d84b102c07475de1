"""
Fixed-iteration RANSAC over the minimal solver with pixel reprojection scoring.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .alignment import PointPairSet, similarity_from_affine_inliers, umeyama_similarity
from .config import DEFAULT_THREADS, RANSAC_CONFIG
from .core_types import Correspondence, GeneralizedCamera, SimilarityTransform, Transform, project
from .errors import BehindCamera, DegenerateConfiguration, EstimationFailure, NoHypothesis
from .pipeline import Alignment, Hypothesis, HypothesisKind, SolverVariant, solve_minimal

logger = logging.getLogger(__name__)

MIN_INLIERS = 4
REFIT_MAX_ROUNDS = 50
REFIT_TOL = 1e-10


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = RANSAC_CONFIG['iterations']
    inlier_threshold_px: float = RANSAC_CONFIG['inlier_threshold_px']
    seed: int = RANSAC_CONFIG['seed']
    variant: SolverVariant = field(default_factory=SolverVariant)
    threads: int = DEFAULT_THREADS
    record_history: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("RANSAC needs at least one iteration")
        if not self.inlier_threshold_px > 0.0:
            raise ValueError("Inlier threshold must be positive")
        if self.threads < 1:
            raise ValueError("Thread count must be positive")


@dataclass(frozen=True)
class RansacStats:
    minimal_problems: int
    failed_problems: int
    hypotheses_scored: int
    solver_seconds: float
    total_seconds: float

    @property
    def solutions_per_problem(self) -> float:
        """Mean hypotheses per successful minimal problem."""
        solved = self.minimal_problems - self.failed_problems
        return self.hypotheses_scored / solved if solved else 0.0


@dataclass(frozen=True)
class RansacResult:
    transform: SimilarityTransform
    inlier_indices: np.ndarray
    iterations_run: int
    best_hypothesis_kind: HypothesisKind
    best_hypothesis: Hypothesis
    stats: RansacStats
    score_history: Optional[List[int]] = None


class _ScoringData:
    """Correspondences as arrays, grouped by camera for batched projection."""

    def __init__(self, correspondences: Sequence[Correspondence], rig: GeneralizedCamera):
        self.world = np.array([c.world_point for c in correspondences])
        self.pixels = np.array([c.pixel for c in correspondences])
        self.origins = np.array([c.ray.origin for c in correspondences])
        self.directions = np.array([c.ray.direction for c in correspondences])
        cams = np.array([c.camera_index for c in correspondences])
        if np.any(cams < 0) or np.any(cams >= len(rig)):
            raise ValueError("Correspondence references a camera outside the rig")
        self.groups = [(rig.cameras[ci], np.flatnonzero(cams == ci)) for ci in np.unique(cams)]

    def errors(self, transform: Transform) -> np.ndarray:
        mapped = transform.apply(self.world)
        errors = np.full(len(mapped), np.inf)
        for camera, idx in self.groups:
            local = camera.to_camera_frame(mapped[idx])
            depth = local[:, 2]
            front = depth > 0.0
            proj = camera.focal_length * local[front, :2] / depth[front, None] + camera.principal_point
            errors[idx[front]] = np.linalg.norm(proj - self.pixels[idx[front]], axis=1)
        return errors

    def ray_points(self, transform: Transform, indices: np.ndarray) -> np.ndarray:
        """Closest points on the measured rays to the transformed world points."""
        mapped = transform.apply(self.world[indices])
        origins = self.origins[indices]
        directions = self.directions[indices]
        depths = np.einsum('ij,ij->i', mapped - origins, directions)
        return origins + depths[:, None] * directions


def reprojection_error(transform: Transform, corr: Correspondence, rig: GeneralizedCamera) -> float:
    """Pixel distance between the projected transformed point and the observation; +inf behind the camera."""
    try:
        pixel = project(rig.cameras[corr.camera_index], transform.apply(corr.world_point))
    except BehindCamera:
        return float('inf')
    return float(np.linalg.norm(pixel - corr.pixel))


def reprojection_errors(transform: Transform, correspondences: Sequence[Correspondence],
                        rig: GeneralizedCamera) -> np.ndarray:
    """Vectorized reprojection_error over a list of correspondences."""
    return _ScoringData(correspondences, rig).errors(transform)


@dataclass
class _Outcome:
    iteration: int
    hypothesis: Optional[Hypothesis] = None
    inliers: Optional[np.ndarray] = None
    count: int = 0
    mean_error: float = float('inf')
    hypotheses: int = 0
    solver_seconds: float = 0.0

    def beats(self, other: "_Outcome") -> bool:
        if self.hypothesis is None:
            return False
        if other.hypothesis is None or self.count > other.count:
            return True
        return self.count == other.count and self.mean_error < other.mean_error


def _score(data: _ScoringData, hypothesis: Hypothesis, threshold: float):
    errors = data.errors(hypothesis.transform)
    inliers = np.flatnonzero(errors <= threshold)
    mean_error = float(errors[inliers].mean()) if inliers.size else float('inf')
    return inliers, mean_error


def _refit_similarity(data: _ScoringData, best: _Outcome, config: RansacConfig) -> tuple:
    """
    '+s' refit: alternate closest ray points under the current transform,
    Umeyama on the inliers and re-scoring until the inlier set and the
    transform stop changing. The result never has fewer inliers than the
    minimal hypothesis.
    """
    threshold = config.inlier_threshold_px
    transform, inliers = best.hypothesis.transform, best.inliers
    kept_transform, kept_inliers, kept_error = transform, inliers, best.mean_error
    for round_index in range(REFIT_MAX_ROUNDS):
        try:
            refit = umeyama_similarity(PointPairSet(data.world[inliers], data.ray_points(transform, inliers)))
        except DegenerateConfiguration as e:
            logger.warning(f"Inlier refit failed in round {round_index}, keeping the previous transform: {e}")
            break
        errors = data.errors(refit)
        refit_inliers = np.flatnonzero(errors <= threshold)
        if refit_inliers.size < MIN_INLIERS:
            break
        refit_error = float(errors[refit_inliers].mean())
        if refit_inliers.size > kept_inliers.size or (
                refit_inliers.size == kept_inliers.size and refit_error <= kept_error):
            kept_transform, kept_inliers, kept_error = refit, refit_inliers, refit_error
        converged = (np.array_equal(refit_inliers, inliers)
                     and _max_displacement(transform, refit, data.world[inliers]) <= REFIT_TOL)
        transform, inliers = refit, refit_inliers
        if converged:
            logger.debug(f"Refit converged after {round_index + 1} rounds with {inliers.size} inliers")
            break
    if kept_transform is best.hypothesis.transform:
        logger.warning(f"Refit discarded, keeping the minimal hypothesis with {kept_inliers.size} inliers")
    return kept_transform, kept_inliers


def _max_displacement(before: SimilarityTransform, after: SimilarityTransform, points: np.ndarray) -> float:
    """Largest move of the mapped points, relative to their spread."""
    mapped = after.apply(points)
    spread = max(float(np.ptp(mapped, axis=0).max()), 1e-300)
    return float(np.abs(mapped - before.apply(points)).max()) / spread


def estimate(correspondences: Sequence[Correspondence], rig: GeneralizedCamera,
             config: Optional[RansacConfig] = None) -> RansacResult:
    """
    Robustly estimate the world-to-rig similarity.

    Args:
        correspondences: 2D-3D correspondences with their back-projected rays
        rig: the generalized camera the rays come from
        config: iterations, threshold, seed, variant and worker threads

    Returns:
        RansacResult: refined similarity, its inliers and run statistics

    Raises:
        EstimationFailure: with fewer than 4 correspondences or when no
            hypothesis reaches 4 inliers
    """
    config = config or RansacConfig()
    n = len(correspondences)
    if n < 4:
        raise EstimationFailure(f"RANSAC needs at least 4 correspondences, got {n}")
    start = time.perf_counter()
    data = _ScoringData(correspondences, rig)

    def run_iteration(iteration: int) -> _Outcome:
        rng = np.random.default_rng([config.seed, iteration])
        sample_idx = rng.choice(n, size=4, replace=False)
        sample = [correspondences[i] for i in sample_idx]
        outcome = _Outcome(iteration)
        tic = time.perf_counter()
        try:
            hypotheses = solve_minimal(sample, config.variant, seed=config.seed)
        except NoHypothesis as e:
            logger.debug(f"Iteration {iteration}: {e} (cause: {e.cause})")
            outcome.solver_seconds = time.perf_counter() - tic
            return outcome
        outcome.solver_seconds = time.perf_counter() - tic
        outcome.hypotheses = len(hypotheses)
        for hypothesis in hypotheses:
            inliers, mean_error = _score(data, hypothesis, config.inlier_threshold_px)
            candidate = _Outcome(iteration, hypothesis, inliers, inliers.size, mean_error)
            if candidate.beats(outcome):
                outcome.hypothesis = hypothesis
                outcome.inliers = inliers
                outcome.count = candidate.count
                outcome.mean_error = mean_error
        return outcome

    iterations = range(config.iterations)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            outcomes = list(executor.map(run_iteration, iterations))
    else:
        outcomes = [run_iteration(it) for it in iterations]

    best = _Outcome(-1)
    history: List[int] = []
    failed = hypotheses_scored = 0
    solver_seconds = 0.0
    for outcome in outcomes:
        if outcome.hypothesis is None:
            failed += 1
        hypotheses_scored += outcome.hypotheses
        solver_seconds += outcome.solver_seconds
        if outcome.beats(best):
            best = outcome
        history.append(best.count)

    if best.hypothesis is None or best.count < MIN_INLIERS:
        raise EstimationFailure(
            f"No hypothesis with at least {MIN_INLIERS} inliers after {config.iterations} iterations "
            f"({failed} minimal problems failed)"
        )

    if config.variant.alignment == Alignment.PLUS_S:
        transform, inliers = _refit_similarity(data, best, config)
    else:
        inliers = best.inliers
        pairs = PointPairSet(data.world[inliers], data.ray_points(best.hypothesis.transform, inliers))
        try:
            transform = similarity_from_affine_inliers(pairs)
        except DegenerateConfiguration as e:
            raise EstimationFailure(f"Final similarity from affine inliers failed: {e}") from e

    stats = RansacStats(
        minimal_problems=config.iterations,
        failed_problems=failed,
        hypotheses_scored=hypotheses_scored,
        solver_seconds=solver_seconds,
        total_seconds=time.perf_counter() - start,
    )
    logger.info(
        f"RANSAC {config.variant.label}: {inliers.size}/{n} inliers after {config.iterations} iterations, "
        f"{stats.solutions_per_problem:.2f} solutions per minimal problem"
    )
    return RansacResult(
        transform=transform,
        inlier_indices=inliers,
        iterations_run=config.iterations,
        best_hypothesis_kind=best.hypothesis.kind,
        best_hypothesis=best.hypothesis,
        stats=stats,
        score_history=history if config.record_history else None,
    )
