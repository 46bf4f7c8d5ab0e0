"""Independent reference computations used to check the closed forms.

Nothing here calls a closed-form embedding: the oracles see only raw kernel
values and raw densities, so agreement between the two routes is evidence
rather than tautology.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .exceptions import NumericalError, UnsupportedError
from .kernels import KernelSpec, as_points, kernel_matrix, kernel_pairs
from .targets import Target, sample


@dataclass(frozen=True)
class QuadratureRule:
    kind: str
    order: int
    nodes: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def _golub_welsch(diag: np.ndarray, offdiag: np.ndarray, mu0: float):
    nodes, vecs = eigh_tridiagonal(diag, offdiag)
    weights = mu0 * vecs[0, :] ** 2
    return nodes, weights


def gauss_legendre(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1]; weights sum to 1."""
    if order < 1:
        raise ValueError("order must be >= 1")
    k = np.arange(1, order)
    offdiag = k / np.sqrt(4.0 * k * k - 1.0)
    nodes, weights = _golub_welsch(np.zeros(order), offdiag, 2.0)
    order_idx = np.argsort(nodes)
    nodes, weights = nodes[order_idx], weights[order_idx]
    return QuadratureRule("gauss_legendre_unit_interval", order, (0.5 * (nodes + 1.0))[:, None], 0.5 * weights)


def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite rule for the standard normal measure; weights sum to 1."""
    if order < 1:
        raise ValueError("order must be >= 1")
    # Monic probabilists' Hermite recurrence: He_{k+1} = x He_k - k He_{k-1}.
    offdiag = np.sqrt(np.arange(1, order, dtype=float))
    nodes, weights = _golub_welsch(np.zeros(order), offdiag, 1.0)
    order_idx = np.argsort(nodes)
    return QuadratureRule("gauss_hermite_std_normal", order, nodes[order_idx][:, None], weights[order_idx])


def tensor_product(rule: QuadratureRule, dim: int) -> QuadratureRule:
    """``dim``-fold tensor product of a one-dimensional rule."""
    if rule.dim != 1:
        raise ValueError("tensor_product expects a 1-d rule")
    if dim > 2:
        raise UnsupportedError("tensor grids beyond d = 2 are not supported")
    grids = np.meshgrid(*([rule.nodes[:, 0]] * dim), indexing="ij")
    wgrids = np.meshgrid(*([rule.weights] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=1), axis=1)
    return QuadratureRule("tensor_product", rule.order, nodes, weights)


def integrate(rule: QuadratureRule, f) -> float:
    """``sum_q w_q f(x_q)``; ``f`` maps an ``(m, d)`` node array to ``m`` values."""
    vals = np.asarray(f(rule.nodes if rule.dim > 1 else rule.nodes[:, 0]), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("integrand is non-finite at a quadrature node")
    return float(np.dot(rule.weights, vals))


def integrate_1d(rule: QuadratureRule, f) -> float:
    if rule.dim != 1:
        raise ValueError("integrate_1d needs a one-dimensional rule")
    return integrate(rule, f)


def integrate_interval(rule: QuadratureRule, f, lo: float, hi: float) -> float:
    """Map a [0, 1] Gauss-Legendre rule onto ``[lo, hi]``."""
    if hi <= lo:
        return 0.0
    x = lo + (hi - lo) * rule.nodes[:, 0]
    vals = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("integrand is non-finite at a quadrature node")
    return float((hi - lo) * np.dot(rule.weights, vals))


def moment_self_test(tol: float = 1e-12) -> None:
    """Check both rule families on known moments; raises on failure."""
    gl = gauss_legendre(10)
    for p in range(20):
        got = integrate_1d(gl, lambda x: x**p)
        if abs(got - 1.0 / (p + 1)) > tol:
            raise NumericalError(f"Gauss-Legendre moment {p} off: {got}")
    gh = gauss_hermite(20)
    double_fact = 1.0
    for p in range(0, 20, 2):
        got = integrate_1d(gh, lambda x: x**p)
        if abs(got - double_fact) > tol * max(1.0, double_fact):
            raise NumericalError(f"Gauss-Hermite moment {p} off: {got}")
        double_fact *= p + 1


def grid(box, resolution: int) -> np.ndarray:
    """Regular grid, ``resolution`` points per axis including both ends."""
    box = np.atleast_2d(np.asarray(box, dtype=float))
    if box.shape[1] != 2:
        raise ValueError("box must be a sequence of (lo, hi) pairs")
    if box.shape[0] > 2:
        raise UnsupportedError("dense grids beyond d = 2 are not supported")
    if resolution < 10:
        raise ValueError("resolution must be >= 10")
    # i / (res - 1) is correctly rounded, so on [0, 1] grid values equal their decimal literals.
    steps = np.arange(resolution) / (resolution - 1)
    axes = [lo + (hi - lo) * steps for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def dense_sup(f, box, resolution: int) -> float:
    """Max of ``|f|`` over a regular grid; ``f`` maps ``(m, d)`` to ``m`` values."""
    vals = np.asarray(f(grid(box, resolution)), dtype=float)
    return float(np.max(np.abs(vals)))


def star_discrepancy_bruteforce(points, resolution: int = 100_001) -> float:
    """Grid sup of the local discrepancy using strict and closed box counts.

    Exact whenever every coordinate of every point lies on the grid.
    """
    X = as_points(points, 1) if np.ndim(points) == 1 else as_points(points)
    d = X.shape[1]
    n = X.shape[0]
    box = [(0.0, 1.0)] * d

    def both(a):
        vol = np.prod(a, axis=1)
        out = np.empty(a.shape[0])
        for start in range(0, a.shape[0], 4096):
            blk = a[start:start + 4096]
            strict = np.all(X[None, :, :] < blk[:, None, :], axis=2).sum(axis=1) / n
            closed = np.all(X[None, :, :] <= blk[:, None, :], axis=2).sum(axis=1) / n
            v = vol[start:start + 4096]
            # Closed counts realise limits from the right, which stay inside [0,1).
            closed_ok = np.all(blk < 1.0, axis=1)
            out[start:start + 4096] = np.maximum(
                np.abs(strict - v), np.where(closed_ok, np.abs(closed - v), 0.0)
            )
        return out

    return dense_sup(both, box, resolution)


def finite_diff_grad(f, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def finite_diff_cross_div(k, x, y, step: float = 1e-4) -> float:
    """Nested central differences for ``sum_j d^2 k / dx_j dy_j``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    total = 0.0
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        total += (k(x + e, y + e) - k(x + e, y - e) - k(x - e, y + e) + k(x - e, y - e)) / (4 * step * step)
    return total


def embedding_quadrature(target: Target, spec: KernelSpec, x, order: int = 20) -> np.ndarray:
    """Kernel mean embedding by quadrature of the raw kernel.

    Uniform targets on [0, 1] split each integral at ``x`` (the kink of the
    Wendland kernels) and at ``x +- 1``; Gaussian targets use tensorised
    Gauss-Hermite of the given order.
    """
    X = as_points(x, target.dim)
    if target.family == "uniform_unit_cube":
        if target.dim != 1:
            raise UnsupportedError("uniform quadrature oracle is 1-d only")
        rule = gauss_legendre(order)
        out = np.empty(X.shape[0])
        for i, xi in enumerate(X[:, 0]):
            cuts = sorted({0.0, 1.0, *[c for c in (xi - 1.0, xi, xi + 1.0) if 0.0 < c < 1.0]})
            f = lambda y: kernel_matrix(spec, [[xi]], y[:, None])[0]  # noqa: E731
            out[i] = sum(integrate_interval(rule, f, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))
        return out
    if target.family == "std_gaussian":
        rule = tensor_product(gauss_hermite(order), target.dim) if target.dim > 1 else gauss_hermite(order)
        K = kernel_matrix(spec, X, rule.nodes)
        return K @ rule.weights
    raise UnsupportedError(f"no quadrature oracle for {target.family}")


def double_integral_quadrature(target: Target, spec: KernelSpec, order: int = 20,
                               outer_order: int | None = None) -> float:
    """Nested quadrature of ``E k(X, Y)``.

    The inner integral (the embedding) uses ``order``; the outer one, whose
    integrand is much smoother, uses ``outer_order`` (default ``order``).
    """
    outer_order = order if outer_order is None else outer_order
    if target.family == "uniform_unit_cube":
        rule = gauss_legendre(outer_order)
        # The inner embedding is a polynomial in x, so the outer rule is exact.
        return integrate_1d(rule, lambda xs: embedding_quadrature(target, spec, xs, order))
    if target.family == "std_gaussian":
        rule = gauss_hermite(outer_order)
        if target.dim > 1:
            rule = tensor_product(rule, target.dim)
        return float(rule.weights @ embedding_quadrature(target, spec, rule.nodes, order))
    raise UnsupportedError(f"no quadrature oracle for {target.family}")


def double_integral_mc(target: Target, spec: KernelSpec, n: int, seed: int) -> tuple[float, float]:
    """Monte Carlo ``E k(X, Y)`` from ``n`` independent pairs; returns ``(mean, stderr)``."""
    pts = sample(target, 2 * n, seed)
    vals = kernel_pairs(spec, pts[:n], pts[n:])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))
