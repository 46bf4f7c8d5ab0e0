"""Stein kernels built from a smooth base kernel and a target score.

For a base kernel written radially, ``grad_x k = a (x - y)`` and
``grad_y k = -a (x - y)``, so the Langevin Stein kernel collapses to

    k_P(x, y) = b - a (x - y).(s(x) - s(y)) + k s(x).s(y)

with ``b = div_x grad_y k`` and ``s`` the score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import targets as tg
from .exceptions import UnsupportedError
from .kernels import (
    GramMatrix,
    KernelSpec,
    as_point,
    as_points,
    kernel_matrix,
    radial_derivatives,
    symmetrize_upper,
)
from .oracle import gauss_hermite


@dataclass(frozen=True)
class SteinKernel:
    base: KernelSpec
    target: tg.Target

    def __post_init__(self):
        if not self.base.differentiable:
            raise ValueError(f"Stein kernels need a smooth base kernel, got {self.base.family}")
        if not self.target.has_score:
            raise UnsupportedError(f"{self.target.family} exposes no score")
        if self.base.dim != self.target.dim:
            raise ValueError("base kernel and target differ in dimension")

    @property
    def dim(self) -> int:
        return self.base.dim

    def scores(self, X) -> np.ndarray:
        return tg.score(self.target, as_points(X, self.dim))


def stein_matrix(base: KernelSpec, X, Y, score_x, score_y) -> np.ndarray:
    """``K_P[i, j] = k_P(X[i], Y[j])`` given precomputed scores."""
    X = as_points(X, base.dim)
    Y = as_points(Y, base.dim)
    sx = np.asarray(score_x, dtype=float).reshape(X.shape)
    sy = np.asarray(score_y, dtype=float).reshape(Y.shape)
    diff = X[:, None, :] - Y[None, :, :]
    r2 = np.sum(diff * diff, axis=-1)
    k, a, b = radial_derivatives(base, r2)
    drift = np.sum(diff * (sx[:, None, :] - sy[None, :, :]), axis=-1)
    return b - a * drift + k * (sx @ sy.T)


def stein_diag(base: KernelSpec, score_x) -> np.ndarray:
    """``k_P(x, x)`` from the scores alone."""
    s = np.atleast_2d(np.asarray(score_x, dtype=float))
    k, _, b = radial_derivatives(base, np.zeros(s.shape[0]))
    return b + k * np.sum(s * s, axis=1)


def stein_kernel_eval(sk: SteinKernel, x, y) -> float:
    X = as_point(x, sk.dim)[None, :]
    Y = as_point(y, sk.dim)[None, :]
    return float(stein_matrix(sk.base, X, Y, sk.scores(X), sk.scores(Y))[0, 0])


def stein_gram(sk: SteinKernel, points, scores=None) -> GramMatrix:
    """Stein Gram matrix; ``scores`` overrides the target score (e.g. from a chain file)."""
    X = as_points(points, sk.dim)
    S = sk.scores(X) if scores is None else np.asarray(scores, dtype=float).reshape(X.shape)
    return GramMatrix(symmetrize_upper(stein_matrix(sk.base, X, X, S, S)))


def centered_kernel_eval(target: tg.Target, spec: KernelSpec, x, y) -> float:
    """``k(x, y) - mu(x) - mu(y) + E k(X, Y)``: zero mean under ``P`` in each argument."""
    X = as_point(x, spec.dim)[None, :]
    Y = as_point(y, spec.dim)[None, :]
    return float(centered_matrix(target, spec, X, Y)[0, 0])


def centered_matrix(target: tg.Target, spec: KernelSpec, X, Y) -> np.ndarray:
    X = as_points(X, spec.dim)
    Y = as_points(Y, spec.dim)
    mx = np.atleast_1d(tg.mean_embedding(target, spec, X))
    my = np.atleast_1d(tg.mean_embedding(target, spec, Y))
    C = tg.kernel_double_integral(target, spec)
    return kernel_matrix(spec, X, Y) - mx[:, None] - my[None, :] + C


def centered_gram(target: tg.Target, spec: KernelSpec, points) -> GramMatrix:
    X = as_points(points, spec.dim)
    return GramMatrix(symmetrize_upper(centered_matrix(target, spec, X, X)))


def stein_zero_mean_check(sk: SteinKernel, x, quad_order: int = 200) -> float:
    """Gauss-Hermite estimate of ``E_{Y ~ N(0,1)} k_P(x, Y)``; ideally zero."""
    if sk.target != tg.std_gaussian(1):
        raise UnsupportedError("zero-mean check is implemented for std_gaussian(1) only")
    rule = gauss_hermite(quad_order)
    X = as_points(x, 1)
    row = stein_matrix(sk.base, X, rule.nodes, sk.scores(X), sk.scores(rule.nodes))[0]
    return float(row @ rule.weights)
