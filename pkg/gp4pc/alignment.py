"""
Point-to-point alignment: Umeyama similarity and linear affine fits.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import linalg

from .core_types import AffineTransform, SimilarityTransform
from .errors import DegenerateConfiguration

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


@dataclass(frozen=True)
class PointPairSet:
    """Matched (source, target) points, stored as two (N, 3) arrays."""
    sources: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.sources, dtype=np.float64).reshape(-1, 3)
        dst = np.asarray(self.targets, dtype=np.float64).reshape(-1, 3)
        if src.shape != dst.shape:
            raise ValueError(f"Mismatched pair arrays: {src.shape} vs {dst.shape}")
        if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
            raise ValueError("Point pairs must be finite")
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "targets", dst)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[npt.ArrayLike, npt.ArrayLike]]) -> "PointPairSet":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def __len__(self) -> int:
        return len(self.sources)

    def subset(self, indices: Sequence[int]) -> "PointPairSet":
        idx = np.asarray(indices, dtype=int)
        return PointPairSet(self.sources[idx], self.targets[idx])


def _source_rank(sources: np.ndarray) -> int:
    centered = sources - sources.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[0] == 0.0:
        return 0
    return int(np.sum(svals > RANK_TOL * svals[0]))


def umeyama_similarity(pairs: PointPairSet) -> SimilarityTransform:
    """
    Least-squares similarity with target ≈ c R source + t.

    Args:
        pairs: at least 3 non-collinear source points with their targets

    Returns:
        SimilarityTransform: positive scale and a proper rotation

    Raises:
        DegenerateConfiguration: for fewer than 3 pairs or collinear sources
    """
    if len(pairs) < 3:
        raise DegenerateConfiguration(f"Similarity needs at least 3 pairs, got {len(pairs)}")
    if _source_rank(pairs.sources) < 2:
        raise DegenerateConfiguration("Source points are collinear")

    src, dst = pairs.sources, pairs.targets
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    cov = (dst - mu_dst).T @ (src - mu_src) / len(src)
    u, d, vh = np.linalg.svd(cov)

    sign = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vh) < 0:
        sign[-1, -1] = -1.0

    var_src = np.square(src - mu_src).sum(axis=1).mean()
    scale = np.trace(np.diag(d) @ sign) / var_src
    if not scale > 0.0:
        raise DegenerateConfiguration(f"Umeyama produced non-positive scale {scale:.3g}")
    rotation = u @ sign @ vh
    return SimilarityTransform(scale, rotation, mu_dst - scale * rotation @ mu_src)


def _affine_lstsq(sources: np.ndarray, targets: np.ndarray) -> AffineTransform:
    design = np.hstack([sources, np.ones((len(sources), 1))])
    solution, _, rank, _ = linalg.lstsq(design, targets, lapack_driver='gelsy')
    if rank < 4:
        raise DegenerateConfiguration("Affine design matrix is rank deficient")
    return AffineTransform(linear=solution[:3].T, translation=solution[3])


def affine_fit(pairs: PointPairSet) -> AffineTransform:
    """
    Twelve-parameter affine map, exact for 4 non-coplanar pairs and least
    squares (QR, no normal equations) for more.

    Raises:
        DegenerateConfiguration: for fewer than 4 pairs or coplanar sources
    """
    if len(pairs) < 4:
        raise DegenerateConfiguration(f"Affine fit needs at least 4 pairs, got {len(pairs)}")
    if _source_rank(pairs.sources) < 3:
        raise DegenerateConfiguration("Source points are coplanar; affine map is not unique")
    return _affine_lstsq(pairs.sources, pairs.targets)


def affine_fit_planar(pairs: PointPairSet) -> AffineTransform:
    """
    Affine fit for coplanar sources: the in-plane map comes from the pairs and
    the out-of-plane column from one virtual pair along the plane normals,
    scaled by the square root of the target/source area ratio.

    Raises:
        DegenerateConfiguration: if sources are collinear or the in-plane map collapses
    """
    if len(pairs) < 3:
        raise DegenerateConfiguration(f"Planar affine fit needs at least 3 pairs, got {len(pairs)}")
    src, dst = pairs.sources, pairs.targets
    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    centered = src - mu_src
    _, svals, vh = np.linalg.svd(centered)
    if svals[0] == 0.0 or svals[1] <= RANK_TOL * svals[0]:
        raise DegenerateConfiguration("Source points are collinear")
    e1, e2 = vh[0], vh[1]
    normal = np.cross(e1, e2)

    in_plane = centered @ np.column_stack([e1, e2])           # (N, 2)
    coeffs, *_ = linalg.lstsq(in_plane, dst - mu_dst, lapack_driver='gelsy')
    img1, img2 = coeffs                                       # images of e1, e2
    cross = np.cross(img1, img2)
    area_ratio = np.linalg.norm(cross)
    if area_ratio <= RANK_TOL * max(np.linalg.norm(img1) * np.linalg.norm(img2), 1e-300):
        raise DegenerateConfiguration("Target points collapse onto a line")
    target_normal = cross / np.sqrt(area_ratio)

    reach = np.sqrt(np.square(centered).sum(axis=1).mean())
    sources = np.vstack([src, mu_src + reach * normal])
    targets = np.vstack([dst, mu_dst + reach * target_normal])
    return _affine_lstsq(sources, targets)


def similarity_from_affine_inliers(pairs: PointPairSet) -> SimilarityTransform:
    """Final '+a' similarity over the inliers of the best affine hypothesis."""
    return umeyama_similarity(pairs)
