"""
Real roots of four quadrics in (s1, s2, s3, s4) over the 15-monomial basis.

Two backends share one contract:
  - "homotopy": total-degree continuation from s_i² = γ_i (16 start paths,
    all tracked together as one batch).
  - "macaulay": null space of the degree-5 Macaulay matrix; the roots are the
    eigenvalues of the 16x16 multiplication matrix of a random linear form.

Both work on a balanced copy of the system (s = σ z, rows at unit max-norm),
polish real endpoints with damped Newton, and report residuals on the
row-normalized system in the original variables.
"""
from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import linalg

from .config import SOLVER_CONFIG
from .congruence import MONOMIALS, NUM_MONOMIALS, monomial_vector, row_to_quadratic_form
from .core_types import Ray
from .errors import SolverFailure

logger = logging.getLogger(__name__)

NUM_EQUATIONS = 4
MAX_SOLUTIONS = 16   # Bezout bound for four quadrics


@dataclass(frozen=True)
class QuadricSystem:
    """A 4x15 coefficient matrix over MONOMIALS, one row per quadric."""
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=np.float64)
        if coeffs.shape != (NUM_EQUATIONS, NUM_MONOMIALS):
            raise ValueError(f"Expected a 4x15 coefficient matrix, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("Quadric system coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    def normalized(self) -> "QuadricSystem":
        """Rows scaled to unit max-norm (all-zero rows are left alone)."""
        norms = np.abs(self.coefficients).max(axis=1)
        norms[norms == 0.0] = 1.0
        return QuadricSystem(self.coefficients / norms[:, None])

    def evaluate(self, s: npt.ArrayLike) -> np.ndarray:
        """Row values at s, shape (..., 4)."""
        return monomial_vector(s) @ self.coefficients.T

    def residual(self, s: npt.ArrayLike) -> np.ndarray:
        """max |row · monomials(s)| on the normalized system."""
        return np.abs(self.normalized().evaluate(s)).max(axis=-1)


@dataclass(frozen=True)
class SolutionSet:
    """Candidate depth tuples (n, 4) with their residuals (n,)."""
    depths: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        depths = np.asarray(self.depths, dtype=np.float64).reshape(-1, 4)
        residuals = np.asarray(self.residuals, dtype=np.float64).reshape(-1)
        if len(depths) != len(residuals):
            raise ValueError("Every solution needs a residual")
        if len(depths) > MAX_SOLUTIONS:
            raise ValueError(f"At most {MAX_SOLUTIONS} solutions, got {len(depths)}")
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "residuals", residuals)

    def __len__(self) -> int:
        return len(self.depths)

    def __iter__(self) -> Iterator[Tuple[float, float, float, float]]:
        for row in self.depths:
            yield tuple(float(v) for v in row)

    def closest(self, target: npt.ArrayLike) -> Optional[np.ndarray]:
        """The solution nearest to target, or None when empty."""
        if not len(self):
            return None
        dists = np.linalg.norm(self.depths - np.asarray(target, dtype=np.float64), axis=1)
        return self.depths[int(np.argmin(dists))]


@dataclass(frozen=True)
class SolveOptions:
    seed: int = 0
    backend: str = SOLVER_CONFIG['backend']
    residual_tol: float = SOLVER_CONFIG['residual_tol']
    polish_tol: float = SOLVER_CONFIG['polish_tol']
    merge_tol: float = SOLVER_CONFIG['merge_tol']
    realness_tol: float = SOLVER_CONFIG['realness_tol']
    max_steps: int = SOLVER_CONFIG['max_homotopy_steps']
    initial_step: float = SOLVER_CONFIG['initial_step']
    max_step: float = SOLVER_CONFIG['max_step']
    min_step: float = SOLVER_CONFIG['min_step']


@dataclass(frozen=True)
class GridSpec:
    """Start grid of the multi-start Newton oracle: nodes_per_axis⁴ nodes in [-bound, bound]⁴."""
    bound: float = 10.0
    nodes_per_axis: int = 9
    max_iterations: int = 60
    tol: float = 1e-11

    @classmethod
    def for_rays(cls, rays: Sequence[Ray], **kwargs) -> "GridSpec":
        """Bound 10·B with B the largest pinhole-to-pinhole distance plus 1."""
        origins = np.array([ray.origin for ray in rays])
        spread = max(np.linalg.norm(a - b) for a, b in itertools.combinations(origins, 2))
        return cls(bound=10.0 * (spread + 1.0), **kwargs)


class _BalancedSystem:
    """Row-normalized system in z = s / σ, with fast batched value and Jacobian."""

    def __init__(self, normalized: QuadricSystem):
        coeffs = normalized.coefficients
        quad_mag = np.abs(coeffs[:, :10]).max()
        lin_mag = np.abs(coeffs[:, 10:14]).max()
        const_mag = np.abs(coeffs[:, 14]).max()
        if quad_mag > 0.0 and const_mag > 0.0:
            sigma = np.sqrt(const_mag / quad_mag)
        elif quad_mag > 0.0 and lin_mag > 0.0:
            sigma = lin_mag / quad_mag
        else:
            sigma = 1.0
        self.sigma = float(np.clip(sigma, 1e-8, 1e8))

        scaled = coeffs.copy()
        scaled[:, :10] *= self.sigma ** 2
        scaled[:, 10:14] *= self.sigma
        self.rows = QuadricSystem(scaled).normalized().coefficients
        forms = [row_to_quadratic_form(row) for row in self.rows]
        self.quad = np.stack([f[0] for f in forms])       # (4, 4, 4)
        self.linear = np.stack([f[1] for f in forms])     # (4, 4)
        self.constant = np.array([f[2] for f in forms])   # (4,)

    def value(self, z: np.ndarray) -> np.ndarray:
        return (np.einsum('rij,ni,nj->nr', self.quad, z, z)
                + z @ self.linear.T + self.constant)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * np.einsum('rij,nj->nri', self.quad, z) + self.linear


def _solve_batched(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a[n] x[n] = b[n]; singular or non-finite systems give NaN rows."""
    out = np.full(b.shape, np.nan, dtype=np.result_type(a, b))
    good = np.isfinite(a).all(axis=(1, 2)) & np.isfinite(b).all(axis=1)
    if not good.any():
        return out
    try:
        out[good] = np.linalg.solve(a[good], b[good][..., None])[..., 0]
    except np.linalg.LinAlgError:
        for n in np.flatnonzero(good):
            try:
                out[n] = np.linalg.solve(a[n], b[n])
            except np.linalg.LinAlgError:
                pass
    return out


def _damped_newton(system: _BalancedSystem, z: np.ndarray, iterations: int, tol: float) -> np.ndarray:
    """Newton with step halving on max |F|; works on real or complex batches."""
    z = z.copy()
    for _ in range(iterations):
        f = system.value(z)
        norm = np.abs(f).max(axis=1)
        active = np.flatnonzero(np.isfinite(norm) & (norm > tol))
        if active.size == 0:
            break
        step = _solve_batched(system.jacobian(z[active]), f[active])
        best = z[active].copy()
        taken = np.zeros(active.size, dtype=bool)
        lam = 1.0
        for _ in range(12):
            cand = z[active] - lam * step
            cand_norm = np.abs(system.value(cand)).max(axis=1)
            improve = ~taken & np.isfinite(cand_norm) & (cand_norm < norm[active])
            best[improve] = cand[improve]
            taken |= improve
            if taken.all():
                break
            lam *= 0.5
        z[active] = best
        if not taken.any():
            break
    return z


def _start_constants(seed: int) -> Tuple[np.ndarray, complex]:
    rng = np.random.default_rng([seed, 0x51A7])
    gammas = np.exp(2j * np.pi * rng.random(NUM_EQUATIONS))
    gamma = complex(np.exp(2j * np.pi * rng.random()))
    return gammas, gamma


def _homotopy_roots(system: _BalancedSystem, opts: SolveOptions) -> Tuple[np.ndarray, int]:
    """
    Track H(z, t) = (1 - t) Γ G(z) + t F(z) from t = 0 to 1 for all 16 start
    points of G(z) = z² - γ. Returns (endpoints of finished paths, count).
    """
    gammas, gamma = _start_constants(opts.seed)
    roots = np.sqrt(gammas)
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=NUM_EQUATIONS)))
    z = signs * roots                                  # (16, 4) complex
    paths = len(z)

    def residual(zz, tt):
        start = zz * zz - gammas
        return (1.0 - tt)[:, None] * gamma * start + tt[:, None] * system.value(zz)

    def jac(zz, tt):
        start_jac = np.einsum('ni,ij->nij', 2.0 * zz, np.eye(NUM_EQUATIONS))
        return (1.0 - tt)[:, None, None] * gamma * start_jac + tt[:, None, None] * system.jacobian(zz)

    def velocity(zz, tt):
        dt = system.value(zz) - gamma * (zz * zz - gammas)
        return -_solve_batched(jac(zz, tt), dt)

    t = np.zeros(paths)
    h = np.full(paths, opts.initial_step)
    streak = np.zeros(paths, dtype=int)
    status = np.zeros(paths, dtype=int)   # 0 tracking, 1 finished, -1 failed

    for _ in range(opts.max_steps):
        act = np.flatnonzero(status == 0)
        if act.size == 0:
            break
        za, ta = z[act], t[act]
        last = h[act] >= 1.0 - ta
        ha = np.where(last, 1.0 - ta, h[act])
        t1 = np.where(last, 1.0, ta + ha)
        hh = ha[:, None]

        k1 = velocity(za, ta)
        k2 = velocity(za + 0.5 * hh * k1, ta + 0.5 * ha)
        k3 = velocity(za + 0.5 * hh * k2, ta + 0.5 * ha)
        k4 = velocity(za + hh * k3, t1)
        zc = za + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        first = None
        for _ in range(3):
            dz = _solve_batched(jac(zc, t1), residual(zc, t1))
            zc = zc - dz
            size = np.abs(dz).max(axis=1)
            if first is None:
                first = size
        scale = 1.0 + np.abs(zc).max(axis=1)
        ok = (np.isfinite(zc).all(axis=1) & (size <= 1e-8 * scale) & (first <= 0.1 * scale))

        good, bad = act[ok], act[~ok]
        z[good] = zc[ok]
        t[good] = t1[ok]
        streak[good] += 1
        grow = good[streak[good] >= 3]
        h[grow] = np.minimum(2.0 * h[grow], opts.max_step)
        streak[grow] = 0
        status[good[t[good] >= 1.0]] = 1

        h[bad] *= 0.5
        streak[bad] = 0
        status[bad[h[bad] < opts.min_step]] = -1
        status[act[np.abs(z[act]).max(axis=1) > 1e8]] = -1
    else:
        status[status == 0] = -1

    finished = status == 1
    failed = int(np.sum(~finished))
    if failed:
        logger.debug(f"Homotopy: {failed} of {paths} paths did not reach t=1")
    return z[finished], int(finished.sum())


@functools.lru_cache(maxsize=4)
def _macaulay_layout(degree: int = 5):
    monomials = sorted(
        (m for m in itertools.product(range(degree + 1), repeat=4) if sum(m) <= degree),
        key=lambda m: (sum(m), tuple(-e for e in m)),
    )
    index: Dict[Tuple[int, ...], int] = {m: k for k, m in enumerate(monomials)}
    multipliers = [m for m in monomials if sum(m) <= degree - 2]
    rows, cols, polys, terms = [], [], [], []
    for r in range(NUM_EQUATIONS):
        for mi, mult in enumerate(multipliers):
            row = r * len(multipliers) + mi
            for k, term in enumerate(MONOMIALS):
                rows.append(row)
                cols.append(index[tuple(a + b for a, b in zip(mult, term))])
                polys.append(r)
                terms.append(k)
    low = [index[m] for m in monomials if sum(m) <= degree - 1]
    shifts = []
    for var in range(4):
        unit = tuple(1 if i == var else 0 for i in range(4))
        shifts.append([index[tuple(a + b for a, b in zip(monomials[k], unit))] for k in low])
    one = low.index(index[(0, 0, 0, 0)])
    coords = [low.index(index[tuple(1 if i == var else 0 for i in range(4))]) for var in range(4)]
    return {
        'num_rows': NUM_EQUATIONS * len(multipliers),
        'num_cols': len(monomials),
        'rows': np.array(rows), 'cols': np.array(cols),
        'polys': np.array(polys), 'terms': np.array(terms),
        'low': np.array(low), 'shifts': np.array(shifts),
        'one': one, 'coords': coords,
    }


def _macaulay_roots(system: _BalancedSystem, opts: SolveOptions) -> np.ndarray:
    """Roots from the null space of the Macaulay matrix via a multiplication matrix."""
    layout = _macaulay_layout()
    mac = np.zeros((layout['num_rows'], layout['num_cols']))
    mac[layout['rows'], layout['cols']] = system.rows[layout['polys'], layout['terms']]
    try:
        _, svals, vh = linalg.svd(mac, lapack_driver="gesvd")
    except linalg.LinAlgError as e:
        raise SolverFailure(f"Macaulay SVD failed: {e}") from e
    rank = layout['num_cols'] - MAX_SOLUTIONS
    if svals[rank - 1] <= 1e-12 * svals[0]:
        raise SolverFailure("Macaulay null space is larger than 16; system is degenerate")
    null = vh[rank:].T
    low = null[layout['low']]
    weights = np.random.default_rng([opts.seed, 0xAC7]).standard_normal(4)
    shifted = sum(w * null[layout['shifts'][k]] for k, w in enumerate(weights))
    try:
        action, *_ = linalg.lstsq(low, shifted)
        _, vecs = linalg.eig(action)
    except linalg.LinAlgError as e:
        raise SolverFailure(f"Action matrix eigen-decomposition failed: {e}") from e
    values = low @ vecs
    with np.errstate(divide='ignore', invalid='ignore'):
        roots = values[layout['coords']].T / values[layout['one']][:, None]
    return roots


def _finalize(system: _BalancedSystem, normalized: QuadricSystem, roots: np.ndarray,
              opts: SolveOptions) -> SolutionSet:
    """Real extraction, Newton polish, residual filter, merge and sort."""
    roots = roots[np.isfinite(roots).all(axis=1)]
    if roots.size:
        roots = _damped_newton(system, roots.astype(np.complex128), 5, 1e-14)
    real = np.abs(roots.imag) <= opts.realness_tol * (1.0 + np.abs(roots.real))
    z = roots[real.all(axis=1)].real if roots.size else np.zeros((0, 4))
    if not len(z):
        return SolutionSet()
    z = _damped_newton(system, z, 20, opts.polish_tol * 1e-2)
    depths = system.sigma * z
    residuals = np.abs(normalized.evaluate(depths)).max(axis=1)
    keep = np.isfinite(residuals) & (residuals <= opts.residual_tol)
    depths, residuals = depths[keep], residuals[keep]

    merged: List[int] = []
    for k in np.argsort(residuals, kind='stable'):
        tol = opts.merge_tol * (1.0 + np.abs(depths[k]).max())
        if all(np.abs(depths[k] - depths[j]).max() > tol for j in merged):
            merged.append(int(k))
    depths, residuals = depths[merged], residuals[merged]
    if len(depths) > MAX_SOLUTIONS:
        logger.warning(f"Discarding {len(depths) - MAX_SOLUTIONS} surplus roots above the Bezout bound")
        depths, residuals = depths[:MAX_SOLUTIONS], residuals[:MAX_SOLUTIONS]
    order = np.lexsort(depths.T[::-1])
    return SolutionSet(depths[order], residuals[order])


def solve(system: QuadricSystem, opts: Optional[SolveOptions] = None) -> SolutionSet:
    """
    All isolated real solutions of the system.

    Args:
        system: four quadrics in the depths s1..s4 over the 15-monomial basis
        opts: backend, tolerances and seed of the random start system

    Returns:
        SolutionSet: real roots sorted lexicographically, at most 16

    Raises:
        SolverFailure: if the backend produces no root at all
    """
    opts = opts or SolveOptions()
    normalized = system.normalized()
    balanced = _BalancedSystem(normalized)
    if opts.backend == 'homotopy':
        roots, finished = _homotopy_roots(balanced, opts)
        if finished == 0:
            raise SolverFailure("Homotopy continuation lost every path")
    elif opts.backend == 'macaulay':
        roots = _macaulay_roots(balanced, opts)
    else:
        raise ValueError(f"Unknown solver backend: {opts.backend}")
    solutions = _finalize(balanced, normalized, roots, opts)
    logger.debug(f"{opts.backend} solve: {len(roots)} endpoints, {len(solutions)} real solutions")
    return solutions


def oracle_solve(system: QuadricSystem, grid: Optional[GridSpec] = None,
                 opts: Optional[SolveOptions] = None) -> SolutionSet:
    """Multi-start damped Newton from every grid node. For verification, not the hot path."""
    grid = grid or GridSpec()
    opts = opts or SolveOptions()
    normalized = system.normalized()
    balanced = _BalancedSystem(normalized)
    axis = np.linspace(-grid.bound, grid.bound, grid.nodes_per_axis)
    starts = np.array(list(itertools.product(axis, repeat=4))) / balanced.sigma
    z = _damped_newton(balanced, starts, grid.max_iterations, grid.tol)
    converged = np.abs(balanced.value(z)).max(axis=1) <= 1e3 * grid.tol
    return _finalize(balanced, normalized, z[converged].astype(np.complex128), opts)


def filter_positive(solutions: SolutionSet, slack: float = SOLVER_CONFIG['positivity_slack']) -> SolutionSet:
    """Keep tuples with every depth >= -slack, clamped to zero."""
    if not len(solutions):
        return SolutionSet()
    keep = np.all(solutions.depths >= -slack, axis=1)
    return SolutionSet(np.maximum(solutions.depths[keep], 0.0), solutions.residuals[keep])
