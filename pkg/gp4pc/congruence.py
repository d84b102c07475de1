"""
Congruence invariants of four points and the polynomial constraint rows they
induce on the ray depths s = (s1, s2, s3, s4).

Every constraint is a quadratic in s, stored as a 15-vector of coefficients
over MONOMIALS. Rays and points are indexed 0..3; edges are index pairs.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .config import SOLVER_CONFIG
from .core_types import Ray, Vec3
from .errors import DegenerateInput, ParallelLines, UnknownPair

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
EdgePair = Tuple[Edge, Edge]
ConstraintRow = npt.NDArray[np.float64]     # shape: (15,)

# [s1², s2², s3², s4², s1s2, s1s3, s1s4, s2s3, s2s4, s3s4, s1, s2, s3, s4, 1]
MONOMIALS: Tuple[Tuple[int, int, int, int], ...] = (
    (2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2),
    (1, 1, 0, 0), (1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1), (0, 0, 1, 1),
    (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1),
    (0, 0, 0, 0),
)
NUM_MONOMIALS = len(MONOMIALS)
SQUARE_SLOTS = (0, 1, 2, 3)
CROSS_SLOTS = {(0, 1): 4, (0, 2): 5, (0, 3): 6, (1, 2): 7, (1, 3): 8, (2, 3): 9}
LINEAR_SLOTS = (10, 11, 12, 13)
CONSTANT_SLOT = 14

E12, E13, E14, E23, E24, E34 = (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)
EDGES: Tuple[Edge, ...] = (E12, E13, E14, E23, E24, E34)
INDEPENDENT_PAIRS: Tuple[EdgePair, ...] = (
    (E12, E34), (E12, E13), (E12, E14), (E12, E23), (E12, E24),
)


@dataclass(frozen=True)
class CongruenceRatios:
    """
    Signed line parameters of the mutually closest points
    m′ = x1 + r1 (x2 - x1) and m″ = x3 + r2 (x4 - x3), plus squared-length
    ratios K[(e, f)] = |e|² / |f|² for every ordered pair of distinct edges.
    """
    r1: float
    r2: float
    K: Dict[EdgePair, float]
    closest_first: Vec3
    closest_second: Vec3

    @property
    def gap(self) -> float:
        """Length of the common perpendicular between the two lines."""
        return float(np.linalg.norm(self.closest_first - self.closest_second))

    def k(self, first: Edge, second: Edge) -> float:
        return self.K[(first, second)]


def monomial_vector(s: npt.ArrayLike) -> np.ndarray:
    """Evaluate MONOMIALS at s; accepts (..., 4) real or complex arrays."""
    s = np.asarray(s)
    s1, s2, s3, s4 = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    return np.stack([
        s1 * s1, s2 * s2, s3 * s3, s4 * s4,
        s1 * s2, s1 * s3, s1 * s4, s2 * s3, s2 * s4, s3 * s4,
        s1, s2, s3, s4, np.ones_like(s1),
    ], axis=-1)


def row_to_quadratic_form(row: npt.ArrayLike) -> Tuple[np.ndarray, np.ndarray, float]:
    """Split a row into (Q, g, c) with row · monomials(s) = sᵀQs + gᵀs + c, Q symmetric."""
    row = np.asarray(row, dtype=np.float64)
    quad = np.diag(row[list(SQUARE_SLOTS)])
    for (i, j), slot in CROSS_SLOTS.items():
        quad[i, j] = quad[j, i] = 0.5 * row[slot]
    return quad, row[list(LINEAR_SLOTS)].copy(), float(row[CONSTANT_SLOT])


def quadratic_form_to_row(quad: np.ndarray, linear: np.ndarray, constant: float) -> ConstraintRow:
    """Collect sᵀQs + gᵀs + c into the monomial basis (Q need not be symmetric)."""
    sym = 0.5 * (quad + quad.T)
    row = np.zeros(NUM_MONOMIALS)
    row[list(SQUARE_SLOTS)] = np.diag(sym)
    for (i, j), slot in CROSS_SLOTS.items():
        row[slot] = 2.0 * sym[i, j]
    row[list(LINEAR_SLOTS)] = linear
    row[CONSTANT_SLOT] = constant
    return row


def _affine_dot_row(a0: np.ndarray, a_lin: np.ndarray, b0: np.ndarray, b_lin: np.ndarray) -> ConstraintRow:
    """Row of (a0 + A s)ᵀ(b0 + B s) for 3-vectors a0, b0 and 3x4 matrices A, B."""
    quad = a_lin.T @ b_lin
    linear = a0 @ b_lin + b0 @ a_lin
    return quadratic_form_to_row(quad, linear, float(a0 @ b0))


def _point_on_ray(index: int, rays: Sequence[Ray]) -> Tuple[np.ndarray, np.ndarray]:
    """y_i = p_i + s_i u_i as (offset, 3x4 coefficient matrix)."""
    lin = np.zeros((3, 4))
    lin[:, index] = rays[index].direction
    return rays[index].origin.copy(), lin


def _combination(weights: Sequence[float], rays: Sequence[Ray]) -> Tuple[np.ndarray, np.ndarray]:
    """Σ w_i y_i as (offset, 3x4 coefficient matrix)."""
    offset = np.zeros(3)
    lin = np.zeros((3, 4))
    for i, w in enumerate(weights):
        if w != 0.0:
            offset += w * rays[i].origin
            lin[:, i] += w * rays[i].direction
    return offset, lin


def _mean_pairwise_distance(points: np.ndarray) -> Tuple[float, np.ndarray]:
    dists = np.array([np.linalg.norm(points[i] - points[j]) for i, j in EDGES])
    return float(dists.mean()), dists


def coplanarity_test(points: npt.ArrayLike, tol: float = SOLVER_CONFIG['coplanarity_tol']) -> bool:
    """
    Scale-normalized volume test: |(x2-x1) x (x3-x1) · (x4-x1)| / L³ <= tol,
    with L the mean pairwise distance.

    Raises:
        DegenerateInput: if two points coincide relative to L
    """
    pts = np.asarray(points, dtype=np.float64).reshape(4, 3)
    mean_dist, dists = _mean_pairwise_distance(pts)
    if mean_dist == 0.0 or np.any(dists < 1e-12 * mean_dist):
        raise DegenerateInput("Sample contains coincident points")
    volume = abs(np.cross(pts[1] - pts[0], pts[2] - pts[0]) @ (pts[3] - pts[0]))
    return bool(volume / mean_dist ** 3 <= tol)


def compute_ratios(points: npt.ArrayLike, parallel_tol: float = SOLVER_CONFIG['parallel_tol']) -> CongruenceRatios:
    """
    Closest points between line(x1, x2) and line(x3, x4) and the K ratios.

    Raises:
        ParallelLines: if the two lines are parallel within parallel_tol
    """
    pts = np.asarray(points, dtype=np.float64).reshape(4, 3)
    d1 = pts[1] - pts[0]
    d2 = pts[3] - pts[2]
    w0 = pts[0] - pts[2]
    a, b, c = d1 @ d1, d1 @ d2, d2 @ d2
    d, e = d1 @ w0, d2 @ w0
    denom = a * c - b * b
    if a == 0.0 or c == 0.0 or denom <= parallel_tol * a * c:
        raise ParallelLines("Lines x1x2 and x3x4 are parallel; closest points are not unique")
    r1 = (b * e - c * d) / denom
    r2 = (a * e - b * d) / denom

    sq = {edge: float(np.sum((pts[edge[0]] - pts[edge[1]]) ** 2)) for edge in EDGES}
    if min(sq.values()) == 0.0:
        raise DegenerateInput("Sample contains coincident points")
    ratios = {(f, g): sq[f] / sq[g] for f, g in itertools.permutations(EDGES, 2)}
    return CongruenceRatios(
        r1=float(r1), r2=float(r2), K=ratios,
        closest_first=pts[0] + r1 * d1, closest_second=pts[2] + r2 * d2,
    )


def beta_coefficients(i: int, j: int, rays: Sequence[Ray]) -> ConstraintRow:
    """Coefficients of |(p_i + s_i u_i) - (p_j + s_j u_j)|² over MONOMIALS."""
    if i == j:
        raise ValueError("beta_coefficients needs two distinct rays")
    pi, ui = rays[i].origin, rays[i].direction
    pj, uj = rays[j].origin, rays[j].direction
    diff = pi - pj
    row = np.zeros(NUM_MONOMIALS)
    row[SQUARE_SLOTS[i]] = ui @ ui
    row[SQUARE_SLOTS[j]] = uj @ uj
    row[CROSS_SLOTS[(min(i, j), max(i, j))]] = -2.0 * (ui @ uj)
    row[LINEAR_SLOTS[i]] = 2.0 * (ui @ diff)
    row[LINEAR_SLOTS[j]] = -2.0 * (uj @ diff)
    row[CONSTANT_SLOT] = diff @ diff
    return row


def orthogonality_rows(rays: Sequence[Ray], ratios: CongruenceRatios) -> Tuple[ConstraintRow, ConstraintRow]:
    """(y1 - y2)ᵀ(m12 - m34) = 0 and (y3 - y4)ᵀ(m12 - m34) = 0."""
    r1, r2 = ratios.r1, ratios.r2
    gap = _combination((1.0 - r1, r1, -(1.0 - r2), -r2), rays)
    first = _combination((1.0, -1.0, 0.0, 0.0), rays)
    second = _combination((0.0, 0.0, 1.0, -1.0), rays)
    return _affine_dot_row(*first, *gap), _affine_dot_row(*second, *gap)


def distance_ratio_row(pair: EdgePair, rays: Sequence[Ray], ratios: CongruenceRatios) -> ConstraintRow:
    """
    (β_first - K β_second) for one of the five independent edge pairs.

    Raises:
        UnknownPair: for pairs outside INDEPENDENT_PAIRS
    """
    if pair not in INDEPENDENT_PAIRS:
        raise UnknownPair(f"Edge pair {pair} is not one of the independent pairs {INDEPENDENT_PAIRS}")
    first, second = pair
    return beta_coefficients(*first, rays) - ratios.k(first, second) * beta_coefficients(*second, rays)


def general_system(rays: Sequence[Ray], ratios: CongruenceRatios) -> np.ndarray:
    """The 4x15 system: both orthogonality rows, (e12, e34) and (e12, e13)."""
    ortho_a, ortho_b = orthogonality_rows(rays, ratios)
    return np.vstack([
        ortho_a,
        ortho_b,
        distance_ratio_row((E12, E34), rays, ratios),
        distance_ratio_row((E12, E13), rays, ratios),
    ])


def diagnostic_rows(rays: Sequence[Ray], ratios: CongruenceRatios) -> np.ndarray:
    """The remaining distance-ratio rows, used for residual checks only."""
    return np.vstack([distance_ratio_row(pair, rays, ratios) for pair in INDEPENDENT_PAIRS[2:]])


@dataclass(frozen=True)
class CoplanarLinearSystem:
    """
    The three components of m12 = m34 as matrix @ (s1, s2, s3) = rhs_constant + rhs_slope * s4.
    """
    matrix: np.ndarray         # (3, 3), columns for s1, s2, s3
    rhs_constant: np.ndarray   # (3,)
    rhs_slope: np.ndarray      # (3,)

    def residual(self, s: npt.ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        return self.matrix @ s[:3] - (self.rhs_constant + self.rhs_slope * s[3])


def coplanar_linear_system(rays: Sequence[Ray], ratios: CongruenceRatios) -> CoplanarLinearSystem:
    r1, r2 = ratios.r1, ratios.r2
    p1, p2, p3, p4 = (ray.origin for ray in rays)
    u1, u2, u3, u4 = (ray.direction for ray in rays)
    matrix = np.column_stack([(1.0 - r1) * u1, r1 * u2, -(1.0 - r2) * u3])
    rhs_constant = (1.0 - r2) * p3 + r2 * p4 - (1.0 - r1) * p1 - r1 * p2
    return CoplanarLinearSystem(matrix=matrix, rhs_constant=rhs_constant, rhs_slope=r2 * u4)
