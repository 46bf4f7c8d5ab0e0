"""Optimal weights, greedy point selection and Stein thinning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import targets as tg
from .discrepancy import mmd
from .exceptions import NumericalError, UnsupportedError
from .kernels import GramMatrix, KernelSpec, as_points, gram, kernel_diag, kernel_matrix
from .stein import SteinKernel, stein_diag, stein_gram, stein_matrix


def first_occurrences(points) -> np.ndarray:
    """Indices of the first copy of each bitwise-distinct row, in input order."""
    X = np.ascontiguousarray(as_points(points))
    seen: dict[bytes, int] = {}
    keep = []
    for i, row in enumerate(X):
        key = row.tobytes()
        if key not in seen:
            seen[key] = i
            keep.append(i)
    return np.asarray(keep, dtype=int)


def optimal_weights_mmd(target: tg.Target, spec: KernelSpec, points, return_gram: bool = False):
    """Weights minimising MMD to ``target``: solve ``K w = z`` with ``z_i = mu(x_i)``.

    Exact duplicate points get weight 0. With ``return_gram=True`` the
    factorised Gram matrix of the distinct points is returned too, so callers
    can read ``jitter_used``.
    """
    if not target.has_embedding(spec):
        raise UnsupportedError(f"no closed-form embedding for ({target.to_fragment()}, {spec.to_fragment()})")
    X = as_points(points, spec.dim)
    keep = first_occurrences(X)
    G = gram(spec, X[keep])
    z = np.atleast_1d(tg.mean_embedding(target, spec, X[keep]))
    w = np.zeros(X.shape[0])
    w[keep] = G.solve(z)
    return (w, G) if return_gram else w


def optimal_weights_ksd(stein_gram: GramMatrix) -> np.ndarray:
    """Sum-to-one weights minimising KSD: ``K_P^{-1} 1 / (1^T K_P^{-1} 1)``."""
    v = stein_gram.solve(np.ones(stein_gram.n))
    total = float(v.sum())
    if not np.isfinite(total) or total == 0.0:
        raise NumericalError(f"degenerate normaliser 1^T K^-1 1 = {total}")
    w = v / total
    return w / w.sum()


def stein_weights(sk: SteinKernel, points, scores=None, return_gram: bool = False):
    """:func:`optimal_weights_ksd` over the distinct points; duplicates get weight 0."""
    X = as_points(points, sk.dim)
    keep = first_occurrences(X)
    S = None if scores is None else np.asarray(scores, dtype=float).reshape(X.shape)[keep]
    G = stein_gram(sk, X[keep], S)
    w = np.zeros(X.shape[0])
    w[keep] = optimal_weights_ksd(G)
    return (w, G) if return_gram else w


class MMDObjective:
    """Greedy MMD: ``k~ = k`` and ``mu~ = mu_P``."""

    def __init__(self, target: tg.Target, spec: KernelSpec):
        if not target.has_embedding(spec):
            raise UnsupportedError(
                f"greedy MMD needs a closed-form embedding for ({target.to_fragment()}, {spec.to_fragment()})"
            )
        self.target = target
        self.spec = spec
        self.dim = spec.dim

    def prepare(self, pool: np.ndarray) -> None:
        self._pool = pool

    def diag(self) -> np.ndarray:
        return kernel_diag(self.spec, self._pool)

    def embedding(self) -> np.ndarray:
        return np.atleast_1d(tg.mean_embedding(self.target, self.spec, self._pool))

    def column(self, idx: int) -> np.ndarray:
        return kernel_matrix(self.spec, self._pool, self._pool[idx:idx + 1])[:, 0]

    def describe(self) -> str:
        return f"mmd[{self.target.to_fragment()}; {self.spec.to_fragment()}]"


class KSDObjective:
    """Greedy KSD: ``k~ = k_P`` and ``mu~ = 0``. ``scores`` may be precomputed for the pool."""

    def __init__(self, sk: SteinKernel, scores=None):
        self.sk = sk
        self.dim = sk.dim
        self._given_scores = scores

    def prepare(self, pool: np.ndarray) -> None:
        self._pool = pool
        if self._given_scores is None:
            self._scores = self.sk.scores(pool)
        else:
            self._scores = np.asarray(self._given_scores, dtype=float).reshape(pool.shape)

    def diag(self) -> np.ndarray:
        return stein_diag(self.sk.base, self._scores)

    def embedding(self) -> np.ndarray:
        return np.zeros(self._pool.shape[0])

    def column(self, idx: int) -> np.ndarray:
        return stein_matrix(
            self.sk.base, self._pool, self._pool[idx:idx + 1], self._scores, self._scores[idx:idx + 1]
        )[:, 0]

    def describe(self) -> str:
        return f"ksd[{self.sk.target.to_fragment()}; {self.sk.base.to_fragment()}]"


@dataclass
class GreedyConfig:
    m: int
    pool: np.ndarray
    objective: MMDObjective | KSDObjective
    distinct: bool = False
    pool_description: str = "explicit"

    def __post_init__(self):
        self.pool = as_points(self.pool, self.objective.dim)
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.pool.shape[0] == 0:
            raise ValueError("candidate pool is empty")
        if self.distinct and self.m > self.pool.shape[0]:
            raise ValueError("distinct selection needs m <= pool size")


@dataclass
class GreedyResult:
    indices: np.ndarray
    points: np.ndarray
    objective_values: np.ndarray = field(repr=False)


def greedy_objective(cfg: GreedyConfig, selected) -> np.ndarray:
    """``g(x) = k~(x,x)/2 + sum_i k~(x, x_i) - m mu~(x)`` over the pool.

    ``selected`` lists the pool indices already chosen; ``m = len(selected) + 1``.
    Columns are accumulated in selection order, so a replay reproduces the
    values of :func:`greedy_select` exactly.
    """
    obj = cfg.objective
    obj.prepare(cfg.pool)
    half_diag, emb = 0.5 * obj.diag(), obj.embedding()
    acc = np.zeros(cfg.pool.shape[0])
    for idx in selected:
        acc = acc + obj.column(int(idx))
    g = half_diag + acc - (len(selected) + 1) * emb
    if cfg.distinct and len(selected):
        g[np.asarray(selected, dtype=int)] = np.inf
    return g


def greedy_select(cfg: GreedyConfig) -> GreedyResult:
    """Sequentially add the pool point minimising ``g``; ties go to the lowest index."""
    obj = cfg.objective
    obj.prepare(cfg.pool)
    half_diag, emb = 0.5 * obj.diag(), obj.embedding()
    acc = np.zeros(cfg.pool.shape[0])
    chosen: list[int] = []
    values = []
    for step in range(1, cfg.m + 1):
        g = half_diag + acc - step * emb
        if cfg.distinct and chosen:
            g[np.asarray(chosen)] = np.inf
        if np.any(np.isnan(g)):
            raise NumericalError("non-finite greedy objective")
        idx = int(np.argmin(g))
        chosen.append(idx)
        values.append(g[idx])
        acc = acc + obj.column(idx)
    idx_arr = np.asarray(chosen, dtype=int)
    return GreedyResult(idx_arr, cfg.pool[idx_arr].copy(), np.asarray(values))


def stein_thin(chain, sk: SteinKernel, m: int, scores=None, distinct: bool = False) -> np.ndarray:
    """Greedy KSD selection restricted to the states of ``chain``; returns indices."""
    X = as_points(chain, sk.dim)
    if X.shape[0] == 0:
        raise ValueError("empty chain")
    if m > X.shape[0]:
        raise ValueError("m exceeds chain length")
    cfg = GreedyConfig(m, X, KSDObjective(sk, scores), distinct=distinct, pool_description="chain")
    return greedy_select(cfg).indices


def grid_pool(lo: float, hi: float, count: int, dim: int = 1) -> np.ndarray:
    """Product grid with ``count`` points per axis on ``[lo, hi]^dim``."""
    axis = np.linspace(lo, hi, count)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def monte_carlo_baseline(target: tg.Target, spec: KernelSpec, n: int, seed: int) -> float:
    """MMD between ``target`` and the uniform-weight empirical measure of ``n`` draws."""
    return mmd(target, spec, tg.sample(target, n, seed))
