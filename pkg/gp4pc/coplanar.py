"""
Closed-form depths for four coplanar points.

With coplanar points the two lines x1x2 and x3x4 meet, so the 3x3 linear
system of the intersection point gives s1, s2, s3 as affine functions of s4
(Cramer's rule). Substituting them into the (e12, e13) distance-ratio row
leaves a scalar quadratic in s4.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .config import SOLVER_CONFIG
from .congruence import CongruenceRatios, E12, E13, compute_ratios, coplanar_linear_system
from .core_types import Ray
from .errors import NoRealRoot, SingularConfiguration
from .quartic_system import SolutionSet

logger = logging.getLogger(__name__)

DET_TOL = 1e-12
LINEAR_FALLBACK_TOL = 1e-14
DOUBLE_ROOT_TOL = 1e-12


@dataclass(frozen=True)
class CoplanarReduction:
    """s_k = G[k] * s4 + H[k] for k = 0, 1, 2."""
    G: Tuple[float, float, float]
    H: Tuple[float, float, float]

    def __post_init__(self):
        if not np.all(np.isfinite(self.G)) or not np.all(np.isfinite(self.H)):
            raise SingularConfiguration("Coplanar reduction produced non-finite coefficients")

    def depths(self, s4: float) -> np.ndarray:
        """The full depth tuple (s1, s2, s3, s4)."""
        g = np.asarray(self.G)
        h = np.asarray(self.H)
        return np.append(g * s4 + h, s4)


@dataclass(frozen=True)
class QuadraticCoefficients:
    A: float
    B: float
    C: float

    def __post_init__(self):
        if self.A == 0.0 and self.B == 0.0 and self.C == 0.0:
            raise ValueError("Quadratic coefficients must not all vanish")

    def evaluate(self, s4: float) -> float:
        return self.A * s4 * s4 + self.B * s4 + self.C

    def residual(self, s4: float) -> float:
        """|A s4² + B s4 + C| relative to the largest coefficient."""
        return abs(self.evaluate(s4)) / max(abs(self.A), abs(self.B), abs(self.C))


def reduce(rays: Sequence[Ray], ratios: CongruenceRatios) -> CoplanarReduction:
    """
    Eliminate s1, s2, s3 from the intersection system by Cramer's rule.

    Raises:
        SingularConfiguration: if the row-normalized determinant is below 1e-12
    """
    system = coplanar_linear_system(rays, ratios)
    norms = np.linalg.norm(system.matrix, axis=1)
    if np.any(norms == 0.0):
        raise SingularConfiguration("Coplanar linear system has an all-zero row")
    matrix = system.matrix / norms[:, None]
    slope = system.rhs_slope / norms
    constant = system.rhs_constant / norms

    det = np.linalg.det(matrix)
    if abs(det) <= DET_TOL:
        raise SingularConfiguration(f"Coplanar linear system is singular (det={det:.3g})")

    G, H = [], []
    for k in range(3):
        replaced = matrix.copy()
        replaced[:, k] = slope
        G.append(float(np.linalg.det(replaced) / det))
        replaced[:, k] = constant
        H.append(float(np.linalg.det(replaced) / det))
    return CoplanarReduction(G=tuple(G), H=tuple(H))


def quadratic_coefficients(reduction: CoplanarReduction, rays: Sequence[Ray], k1213: float) -> QuadraticCoefficients:
    """Substitute the reduction into β12 - K1213·β13 and collect powers of s4."""
    p1, p2, p3 = (ray.origin for ray in rays[:3])
    u1, u2, u3 = (ray.direction for ray in rays[:3])
    p6 = p1 - p2
    p8 = p1 - p3
    K = k1213

    c1 = 1.0 - K
    c2 = 1.0
    c3 = -K
    c4 = -2.0 * u1 @ u2
    c5 = 2.0 * K * u1 @ u3
    c6 = 2.0 * u1 @ p6 - 2.0 * K * u1 @ p8
    c7 = -2.0 * u2 @ p6
    c8 = 2.0 * K * u3 @ p8
    c9 = p6 @ p6 - K * p8 @ p8

    g1, g2, g3 = reduction.G
    h1, h2, h3 = reduction.H
    a = c1 * g1 ** 2 + c2 * g2 ** 2 + c3 * g3 ** 2 + c4 * g1 * g2 + c5 * g1 * g3
    b = (2.0 * (c1 * g1 * h1 + c2 * g2 * h2 + c3 * g3 * h3)
         + c4 * (g1 * h2 + g2 * h1) + c5 * (g1 * h3 + g3 * h1)
         + c6 * g1 + c7 * g2 + c8 * g3)
    c = (c1 * h1 ** 2 + c2 * h2 ** 2 + c3 * h3 ** 2 + c4 * h1 * h2 + c5 * h1 * h3
         + c6 * h1 + c7 * h2 + c8 * h3 + c9)
    return QuadraticCoefficients(A=float(a), B=float(b), C=float(c))


def quadratic_roots(coeffs: QuadraticCoefficients) -> Tuple[float, ...]:
    """
    Real roots of A x² + B x + C, at most two, ascending.

    Raises:
        NoRealRoot: on a negative discriminant or a degenerate constant equation
    """
    a, b, c = coeffs.A, coeffs.B, coeffs.C
    if abs(a) <= LINEAR_FALLBACK_TOL * max(abs(b), abs(c)):
        if b == 0.0:
            raise NoRealRoot("Quadratic degenerates to a non-zero constant")
        return (-c / b,)

    disc = b * b - 4.0 * a * c
    tol = DOUBLE_ROOT_TOL * b * b
    if disc < -tol:
        raise NoRealRoot(f"Negative discriminant {disc:.3g}")
    if abs(disc) <= tol:
        return (-b / (2.0 * a),)

    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return tuple(sorted(float(r) for r in roots))


def solve_coplanar(rays: Sequence[Ray], points: npt.ArrayLike,
                   ratios: Optional[CongruenceRatios] = None,
                   parallel_tol: float = SOLVER_CONFIG['parallel_tol']) -> SolutionSet:
    """
    Positive depth tuples for four coplanar points (at most two).

    Raises:
        SingularConfiguration, ParallelLines, NoRealRoot
    """
    if ratios is None:
        ratios = compute_ratios(points, parallel_tol)
    reduction = reduce(rays, ratios)
    coeffs = quadratic_coefficients(reduction, rays, ratios.k(E12, E13))

    depths, residuals = [], []
    for s4 in quadratic_roots(coeffs):
        candidate = reduction.depths(s4)
        if np.all(candidate > 0.0):
            depths.append(candidate)
            residuals.append(coeffs.residual(s4))
    logger.debug(f"Coplanar solve: {len(depths)} positive tuples")
    if not depths:
        return SolutionSet()
    return SolutionSet(np.array(depths), np.array(residuals))
