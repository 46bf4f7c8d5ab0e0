"""Star discrepancy, MMD, KSD, Koksma-Hlawka checks and fill distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import targets as tg
from .exceptions import DomainError, NumericalError, UnsupportedError
from .kernels import GramMatrix, KernelSpec, as_points, gram
from .oracle import grid

NEGATIVE_CLAMP = 1e-12
STAR_ND_MAX_DIM = 3
STAR_ND_MAX_N = 200


def _unit_cube_points(pts) -> np.ndarray:
    # A flat sequence is n one-dimensional points.
    X = as_points(pts, 1) if np.ndim(pts) == 1 else as_points(pts)
    if X.shape[0] < 1:
        raise ValueError("empty point set")
    if np.any(X < 0) or np.any(X > 1):
        raise DomainError("points must lie in [0, 1]^d")
    return X


def local_discrepancy(a, pts) -> float:
    """Fraction of points in the half-open box ``[0, a)`` minus its volume."""
    X = _unit_cube_points(pts)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (X.shape[1],):
        raise ValueError(f"corner must have dim {X.shape[1]}")
    if np.any(a < 0) or np.any(a > 1):
        raise DomainError("corner must lie in [0, 1]^d")
    inside = np.all(X < a, axis=1)
    return float(inside.mean() - np.prod(a))


def star_discrepancy_1d(pts) -> float:
    X = _unit_cube_points(pts)
    if X.shape[1] != 1:
        raise ValueError("star_discrepancy_1d needs d = 1")
    x = np.sort(X[:, 0])
    n = x.size
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(x - (i - 1) / n, i / n - x)))


def star_discrepancy_nd(pts) -> float:
    """Exact star discrepancy by enumerating candidate box corners.

    Corners range over the product of per-axis sets ``{x_ij} U {1}``. Strict
    counts give the sup of ``volume - count`` and closed counts (at corners
    inside ``[0, 1)^d``) give the sup of ``count - volume`` approached from the
    right. Counts for every corner come from a cumulative histogram.
    """
    X = _unit_cube_points(pts)
    n, d = X.shape
    if d > STAR_ND_MAX_DIM or n > STAR_ND_MAX_N:
        raise ValueError(
            f"brute-force star discrepancy limited to d <= {STAR_ND_MAX_DIM}, n <= {STAR_ND_MAX_N}"
        )
    cands = [np.union1d(X[:, j], [1.0]) for j in range(d)]
    shape = tuple(c.size for c in cands)

    def counts(side: str) -> np.ndarray:
        # x_ij < c[k]  <=>  k >= searchsorted(c, x_ij, "right"); for <= use "left".
        idx = tuple(np.searchsorted(cands[j], X[:, j], side=side) for j in range(d))
        hist = np.zeros(tuple(s + 1 for s in shape), dtype=np.int32)
        np.add.at(hist, idx, 1)
        for ax in range(d):
            np.cumsum(hist, axis=ax, out=hist)
        return hist[tuple(slice(0, s) for s in shape)]

    vol = cands[0]
    for j in range(1, d):
        vol = np.multiply.outer(vol, cands[j])
    strict = counts("right") / n
    closed = counts("left") / n
    best = np.max(vol - strict)
    inner = tuple(slice(0, s - 1) for s in shape)
    closed_inner = closed[inner] - vol[inner]
    if closed_inner.size:
        best = max(best, np.max(closed_inner))
    # |Delta| also admits count - volume under strict counts and the converse.
    best = max(best, np.max(strict - vol), np.max(vol[inner] - closed[inner]) if closed_inner.size else 0.0)
    return float(best)


def star_discrepancy(pts) -> float:
    X = _unit_cube_points(pts)
    return star_discrepancy_1d(X) if X.shape[1] == 1 else star_discrepancy_nd(X)


def midpoint_grid(per_axis: int, dim: int) -> np.ndarray:
    """Product grid of the points ``(2i - 1) / (2m)``, ``m = per_axis``."""
    axis = (2.0 * np.arange(1, per_axis + 1) - 1.0) / (2.0 * per_axis)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def endpoint_grid(per_axis: int, dim: int) -> np.ndarray:
    """Product grid of ``0, 1/(m-1), ..., 1``."""
    axis = np.linspace(0.0, 1.0, per_axis) if per_axis > 1 else np.zeros(1)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_bounds(n: int, dim: int) -> tuple[float, float]:
    """Lower and upper star-discrepancy bounds for a regular grid of n points."""
    root = n ** (1.0 / dim)
    return 1.0 / (2.0 * root), dim / (2.0 * root)


def clamp_quadratic(value: float) -> float:
    """Clamp roundoff negatives; larger negatives signal a wrong constant."""
    if not np.isfinite(value):
        raise NumericalError(f"non-finite discrepancy {value}")
    if value < -NEGATIVE_CLAMP:
        raise NumericalError(f"squared discrepancy {value:.3e} is below -{NEGATIVE_CLAMP:g}")
    return max(value, 0.0)


def mmd_squared(target: tg.Target, spec: KernelSpec, points, weights, K: np.ndarray | None = None) -> float:
    """``E k(X,Y) - 2 sum_i w_i mu(x_i) + w^T K w`` for ``Q = sum_i w_i delta(x_i)``.

    ``K`` may be passed to reuse a precomputed Gram matrix.
    """
    if not target.has_embedding(spec):
        raise UnsupportedError(
            f"no closed-form embedding for ({target.to_fragment()}, {spec.to_fragment()})"
        )
    X = as_points(points, spec.dim)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != X.shape[0]:
        raise ValueError("weights and points differ in length")
    if K is None:
        K = gram(spec, X).entries
    z = tg.mean_embedding(target, spec, X)
    value = tg.kernel_double_integral(target, spec) - 2.0 * np.dot(z, w) + w @ K @ w
    return clamp_quadratic(float(value))


def mmd(target, spec, points, weights=None) -> float:
    X = as_points(points, spec.dim)
    if weights is None:
        weights = np.full(X.shape[0], 1.0 / X.shape[0])
    return float(np.sqrt(mmd_squared(target, spec, X, weights)))


def ksd(stein_gram: GramMatrix | np.ndarray, weights) -> float:
    """``sqrt(w^T K_P w)``."""
    K = stein_gram.entries if isinstance(stein_gram, GramMatrix) else np.asarray(stein_gram, dtype=float)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if K.shape != (w.size, w.size):
        raise ValueError(f"Gram shape {K.shape} does not match {w.size} weights")
    return float(np.sqrt(clamp_quadratic(float(w @ K @ w))))


@dataclass(frozen=True)
class Integrand:
    name: str
    f: object
    integral: float
    variation: float  # int_0^1 |f'(x)| dx


INTEGRANDS = {
    "x2": Integrand("x2", lambda x: x**2, 1.0 / 3.0, 1.0),
    "sin_pi": Integrand("sin_pi", lambda x: np.sin(np.pi * x), 2.0 / np.pi, 2.0),
    "exp": Integrand("exp", np.exp, np.e - 1.0, np.e - 1.0),
}


@dataclass(frozen=True)
class KHReport:
    error: float
    bound: float
    holds: bool


def koksma_hlawka_check(pts, integrand_id: str, variation_const: float | None = None,
                        true_integral: float | None = None) -> KHReport:
    """Compare the cubature error of an equal-weight rule with ``V * D_n^*``."""
    if integrand_id not in INTEGRANDS:
        raise KeyError(f"unknown integrand {integrand_id!r}; choose from {sorted(INTEGRANDS)}")
    item = INTEGRANDS[integrand_id]
    V = item.variation if variation_const is None else variation_const
    I = item.integral if true_integral is None else true_integral
    X = _unit_cube_points(pts)
    if X.shape[1] != 1:
        raise ValueError("koksma_hlawka_check is one-dimensional")
    error = abs(float(np.mean(item.f(X[:, 0]))) - I)
    bound = V * star_discrepancy_1d(X)
    return KHReport(error, bound, error <= bound + 1e-12)


def fill_distance(pts, domain, resolution: int) -> float:
    """Largest distance from a grid point of ``domain`` to its nearest state.

    A lower bound on the true fill distance that tightens with resolution.
    """
    X = as_points(pts)
    if X.shape[0] == 0:
        raise ValueError("empty point set")
    box = np.atleast_2d(np.asarray(domain, dtype=float))
    if box.shape[0] != X.shape[1]:
        raise ValueError("domain and points differ in dimension")
    dist, _ = cKDTree(X).query(grid(box, resolution))
    return float(np.max(dist))
