"""
Minimal solver over one 4-correspondence sample.

For each permutation of the sample: test coplanarity, compute the congruence
ratios, solve for the ray depths (closed form when coplanar, quartic system
otherwise), lift the depths to rig-frame points and align the world points to
them.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .alignment import PointPairSet, affine_fit, affine_fit_planar, umeyama_similarity
from .config import SOLVER_CONFIG
from .congruence import compute_ratios, coplanarity_test, general_system
from .coplanar import solve_coplanar
from .core_types import AffineTransform, Correspondence, SimilarityTransform, Transform
from .errors import DegenerateConfiguration, DegenerateInput, Gp4pcError, NoHypothesis, NoRealRoot
from .quartic_system import QuadricSystem, SolveOptions, filter_positive, solve

logger = logging.getLogger(__name__)

Permutation = Tuple[int, int, int, int]

IDENTITY: Permutation = (0, 1, 2, 3)
# Both orders of each of the three ways to split four points into two lines.
SIX_PERMUTATIONS: Tuple[Permutation, ...] = (
    (0, 1, 2, 3), (2, 3, 0, 1),
    (0, 2, 1, 3), (1, 3, 0, 2),
    (0, 3, 1, 2), (1, 2, 0, 3),
)


class Alignment(str, Enum):
    PLUS_S = "+s"
    PLUS_A = "+a"


class Permutations(str, Enum):
    ONE = "1p"
    SIX = "6p"


class HypothesisKind(str, Enum):
    SIMILARITY = "similarity"
    AFFINE = "affine"


class SolverPath(str, Enum):
    COPLANAR = "coplanar"
    GENERAL = "general"


@dataclass(frozen=True)
class SolverVariant:
    alignment: Alignment = Alignment.PLUS_S
    permutations: Permutations = Permutations.ONE
    coplanar_tol: float = SOLVER_CONFIG['coplanarity_tol']
    use_coplanar_solver: bool = True
    solve_options: SolveOptions = field(default_factory=SolveOptions)

    @property
    def label(self) -> str:
        return f"gP4Pc{self.alignment.value}({self.permutations.value})"

    @property
    def permutation_list(self) -> Tuple[Permutation, ...]:
        return SIX_PERMUTATIONS if self.permutations == Permutations.SIX else (IDENTITY,)


@dataclass(frozen=True)
class Hypothesis:
    """
    One transform candidate. ``depths`` are in sample order (depths[i] belongs
    to sample[i]) whatever permutation produced them.
    """
    kind: HypothesisKind
    transform: Transform
    depths: np.ndarray
    permutation: Permutation
    path: SolverPath

    @property
    def similarity(self) -> Optional[SimilarityTransform]:
        return self.transform if self.kind == HypothesisKind.SIMILARITY else None

    @property
    def affine(self) -> Optional[AffineTransform]:
        return self.transform if self.kind == HypothesisKind.AFFINE else None


def _fit(variant: SolverVariant, pairs: PointPairSet, coplanar: bool) -> Tuple[HypothesisKind, Transform]:
    if variant.alignment == Alignment.PLUS_S:
        return HypothesisKind.SIMILARITY, umeyama_similarity(pairs)
    if coplanar:
        return HypothesisKind.AFFINE, affine_fit_planar(pairs)
    return HypothesisKind.AFFINE, affine_fit(pairs)


def _solve_permutation(sample: Sequence[Correspondence], perm: Permutation,
                       variant: SolverVariant, options: SolveOptions) -> List[Hypothesis]:
    points = np.array([sample[i].world_point for i in perm])
    rays = [sample[i].ray for i in perm]

    coplanar = coplanarity_test(points, variant.coplanar_tol)
    ratios = compute_ratios(points, SOLVER_CONFIG['parallel_tol'])
    if coplanar and variant.use_coplanar_solver:
        path = SolverPath.COPLANAR
        solutions = solve_coplanar(rays, points, ratios)
    else:
        path = SolverPath.GENERAL
        solutions = filter_positive(solve(QuadricSystem(general_system(rays, ratios)), options))
    logger.debug(f"Permutation {perm}: {path.value} path, {len(solutions)} positive depth tuples")
    if not len(solutions):
        raise NoRealRoot(f"No positive depth tuple for permutation {perm}")

    hypotheses = []
    for depths in solutions.depths:
        lifted = np.array([ray.point_at(s) for ray, s in zip(rays, depths)])
        try:
            kind, transform = _fit(variant, PointPairSet(points, lifted), coplanar)
        except DegenerateConfiguration as e:
            logger.debug(f"Alignment failed for depths {depths}: {e}")
            continue
        in_sample_order = np.empty(4)
        in_sample_order[list(perm)] = depths
        hypotheses.append(Hypothesis(kind, transform, in_sample_order, perm, path))
    return hypotheses


def solve_minimal(sample: Sequence[Correspondence], variant: Optional[SolverVariant] = None,
                  seed: int = 0) -> List[Hypothesis]:
    """
    All transform hypotheses of one minimal sample.

    Args:
        sample: four correspondences
        variant: alignment, permutation count and coplanar shortcut
        seed: seed for the randomized solver backends

    Returns:
        List[Hypothesis]: hypotheses from every permutation, each with depths in sample order

    Raises:
        NoHypothesis: if no permutation yields a hypothesis; ``cause`` holds the underlying error
    """
    variant = variant or SolverVariant()
    if len(sample) != 4:
        raise NoHypothesis(f"A minimal sample has 4 correspondences, got {len(sample)}")
    options = dataclasses.replace(variant.solve_options, seed=seed)

    hypotheses: List[Hypothesis] = []
    cause: Optional[Exception] = None
    for perm in variant.permutation_list:
        try:
            hypotheses.extend(_solve_permutation(sample, perm, variant, options))
        except DegenerateInput as e:
            raise NoHypothesis(f"Degenerate minimal sample: {e}", cause=e) from e
        except Gp4pcError as e:
            logger.debug(f"Permutation {perm} failed: {e}")
            if cause is None or isinstance(cause, NoRealRoot):
                cause = e

    if not hypotheses:
        raise NoHypothesis(f"No hypothesis from {len(variant.permutation_list)} permutation(s)", cause=cause)
    return hypotheses


def count_valid_solutions(sample: Sequence[Correspondence], variant: Optional[SolverVariant] = None,
                          seed: int = 0) -> int:
    """Number of hypotheses solve_minimal returns, 0 when it fails."""
    try:
        return len(solve_minimal(sample, variant, seed))
    except NoHypothesis:
        return 0
