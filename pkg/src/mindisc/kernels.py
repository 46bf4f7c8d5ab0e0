"""Kernel families, their derivatives, and Gram matrices with jittered Cholesky.

Families
--------
==========  =====================================  ==================
family      k(x, y), r = ||x - y||                 parameters
==========  =====================================  ==================
gaussian    exp(-r^2 / sigma^2)                    sigma > 0
imq         (sigma^2 + r^2)^(-beta)                sigma > 0, 0<beta<1
wendland1   (1 - r)_+                              (inputs in [0,1]^d)
wendland2   (1 - r)_+^3 (3r + 1)                   (inputs in [0,1]^d)
wendland3   (1 - r)_+^5 (8r^2 + 5r + 1)            (inputs in [0,1]^d)
polynomial  sum_{i=1..p} x^i y^i                   degree p >= 1, d = 1
kh_anchor   prod_j (1 + min(1 - x_j, 1 - y_j))     (inputs in [0,1]^d)
==========  =====================================  ==================

Derivatives are available for the smooth families (gaussian, imq) only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .exceptions import DomainError, IllConditionedError

FAMILIES = ("gaussian", "wendland1", "wendland2", "wendland3", "imq", "polynomial", "kh_anchor")
UNIT_CUBE_FAMILIES = ("wendland1", "wendland2", "wendland3", "kh_anchor")
SMOOTH_FAMILIES = ("gaussian", "imq")

JITTER_START = 1e-10
JITTER_FACTOR = 10.0
JITTER_CAP = 1e-4


@dataclass(frozen=True)
class KernelSpec:
    family: str
    dim: int = 1
    sigma: float | None = None
    beta: float | None = None
    degree: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.family in ("gaussian", "imq"):
            sigma = 1.0 if self.sigma is None else float(self.sigma)
            if not sigma > 0:
                raise ValueError(f"sigma must be positive, got {sigma}")
            object.__setattr__(self, "sigma", sigma)
        elif self.sigma is not None:
            raise ValueError(f"{self.family} takes no sigma")
        if self.family == "imq":
            beta = 0.5 if self.beta is None else float(self.beta)
            if not 0 < beta < 1:
                raise ValueError(f"imq exponent beta must lie in (0, 1), got {beta}")
            object.__setattr__(self, "beta", beta)
        elif self.beta is not None:
            raise ValueError(f"{self.family} takes no beta")
        if self.family == "polynomial":
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"polynomial degree must be an integer >= 1, got {self.degree}")
            if self.dim != 1:
                raise ValueError("polynomial kernel is defined for dim=1 only")
            object.__setattr__(self, "degree", int(self.degree))
        elif self.degree is not None:
            raise ValueError(f"{self.family} takes no degree")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def differentiable(self) -> bool:
        return self.family in SMOOTH_FAMILIES

    def to_fragment(self) -> str:
        """Serialise as ``family=imq sigma=1.0 beta=0.5 dim=2``."""
        parts = [f"family={self.family}"]
        if self.sigma is not None:
            parts.append(f"sigma={self.sigma!r}")
        if self.beta is not None:
            parts.append(f"beta={self.beta!r}")
        if self.degree is not None:
            parts.append(f"degree={self.degree}")
        parts.append(f"dim={self.dim}")
        return " ".join(parts)

    @classmethod
    def from_fragment(cls, text: str) -> "KernelSpec":
        fields = parse_fragment(text)
        if "family" not in fields:
            raise ValueError(f"kernel fragment {text!r} lacks family=")
        unknown = set(fields) - {"family", "dim", "sigma", "beta", "degree"}
        if unknown:
            raise ValueError(f"unknown kernel keys: {sorted(unknown)}")
        kwargs: dict = {"family": fields["family"]}
        try:
            if "dim" in fields:
                kwargs["dim"] = int(fields["dim"])
            for key in ("sigma", "beta"):
                if key in fields:
                    kwargs[key] = float(fields[key])
            if "degree" in fields:
                kwargs["degree"] = int(fields["degree"])
        except ValueError as exc:
            raise ValueError(f"bad kernel fragment {text!r}: {exc}") from None
        return cls(**kwargs)


def parse_fragment(text: str) -> dict[str, str]:
    """Parse whitespace-separated ``key=value`` tokens."""
    out = {}
    for token in text.split():
        key, sep, value = token.partition("=")
        if not sep or not key or not value:
            raise ValueError(f"malformed token {token!r} in {text!r}")
        if key in out:
            raise ValueError(f"duplicate key {key!r} in {text!r}")
        out[key] = value
    return out


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, vectors or (n, d) arrays to a float (n, d) array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError(f"expected at most 2-d input, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    return arr


def as_point(x, dim: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected a point in R^{dim}, got shape {p.shape}")
    return p


def check_domain(spec: KernelSpec, pts: np.ndarray) -> None:
    if spec.family in UNIT_CUBE_FAMILIES and (np.any(pts < 0) or np.any(pts > 1)):
        raise DomainError(f"{spec.family} kernel requires inputs in [0, 1]^{spec.dim}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("non-finite input")


def _radial(spec: KernelSpec, r2: np.ndarray) -> np.ndarray:
    if spec.family == "gaussian":
        return np.exp(-r2 / spec.sigma**2)
    if spec.family == "imq":
        return (spec.sigma**2 + r2) ** (-spec.beta)
    r = np.sqrt(r2)
    t = np.maximum(0.0, 1.0 - r)
    if spec.family == "wendland1":
        return t
    if spec.family == "wendland2":
        return t**3 * (3.0 * r + 1.0)
    return t**5 * (8.0 * r2 + 5.0 * r + 1.0)


def _pairwise(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if spec.family == "kh_anchor":
        return np.prod(1.0 + np.minimum(1.0 - X[:, None, :], 1.0 - Y[None, :, :]), axis=-1)
    if spec.family == "polynomial":
        xy = X[:, None, 0] * Y[None, :, 0]
        return sum(xy**i for i in range(1, spec.degree + 1))
    diff = X[:, None, :] - Y[None, :, :]
    return _radial(spec, np.sum(diff * diff, axis=-1))


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Cross-kernel matrix ``K[i, j] = k(X[i], Y[j])``."""
    X = as_points(X, spec.dim)
    Y = as_points(Y, spec.dim)
    check_domain(spec, X)
    check_domain(spec, Y)
    return _pairwise(spec, X, Y)


def kernel_pairs(spec: KernelSpec, X, Y) -> np.ndarray:
    """Row-wise ``k(X[i], Y[i])``."""
    X = as_points(X, spec.dim)
    Y = as_points(Y, spec.dim)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    check_domain(spec, X)
    check_domain(spec, Y)
    if spec.family == "kh_anchor":
        return np.prod(1.0 + np.minimum(1.0 - X, 1.0 - Y), axis=-1)
    if spec.family == "polynomial":
        xy = X[:, 0] * Y[:, 0]
        return sum(xy**i for i in range(1, spec.degree + 1))
    diff = X - Y
    return _radial(spec, np.sum(diff * diff, axis=-1))


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    """``k(x_i, x_i)`` for every row of ``X``."""
    X = as_points(X, spec.dim)
    check_domain(spec, X)
    if spec.family == "kh_anchor":
        return np.prod(2.0 - X, axis=-1)
    if spec.family == "polynomial":
        xx = X[:, 0] ** 2
        return sum(xx**i for i in range(1, spec.degree + 1))
    return _radial(spec, np.zeros(X.shape[0]))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = as_point(x, spec.dim)
    y = as_point(y, spec.dim)
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


def _require_smooth(spec: KernelSpec) -> None:
    if not spec.differentiable:
        raise ValueError(f"{spec.family} kernel is not differentiable; use gaussian or imq")


def radial_derivatives(spec: KernelSpec, r2: np.ndarray):
    """Return ``(k, a, b)`` as functions of squared distance.

    ``a`` is the scalar with ``grad_x k = a * (x - y)`` and ``b`` is
    ``div_x grad_y k``.
    """
    _require_smooth(spec)
    d = spec.dim
    if spec.family == "gaussian":
        s2 = spec.sigma**2
        k = np.exp(-r2 / s2)
        a = -2.0 / s2 * k
        b = k * (2.0 * d / s2 - 4.0 * r2 / s2**2)
        return k, a, b
    beta = spec.beta
    u = spec.sigma**2 + r2
    k = u ** (-beta)
    a = -2.0 * beta * u ** (-beta - 1.0)
    b = 2.0 * beta * d * u ** (-beta - 1.0) - 4.0 * beta * (beta + 1.0) * r2 * u ** (-beta - 2.0)
    return k, a, b


def kernel_grad_x(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of ``k(x, y)`` with respect to ``x``."""
    _require_smooth(spec)
    x = as_point(x, spec.dim)
    y = as_point(y, spec.dim)
    diff = x - y
    _, a, _ = radial_derivatives(spec, np.dot(diff, diff))
    return a * diff


def kernel_grad_y(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of ``k(x, y)`` with respect to ``y``."""
    _require_smooth(spec)
    x = as_point(x, spec.dim)
    y = as_point(y, spec.dim)
    diff = x - y
    _, a, _ = radial_derivatives(spec, np.dot(diff, diff))
    return -a * diff


def kernel_cross_div(spec: KernelSpec, x, y) -> float:
    """``div_x grad_y k(x, y)``, the trace of the mixed Hessian."""
    _require_smooth(spec)
    x = as_point(x, spec.dim)
    y = as_point(y, spec.dim)
    diff = x - y
    _, _, b = radial_derivatives(spec, np.dot(diff, diff))
    return float(b)


@dataclass
class GramMatrix:
    """Symmetric kernel matrix; ``jitter_used`` is set by :meth:`cholesky`."""

    entries: np.ndarray
    jitter_used: float = 0.0
    _factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of ``entries + jitter_used * I``.

        Jitter starts at 1e-10 * mean(diag) and grows tenfold per failure; a
        jitter above 1e-4 * mean(diag) raises :class:`IllConditionedError`.
        """
        if self._factor is None:
            self._factor, self.jitter_used = jittered_cholesky(self.entries)
        return self._factor

    def solve(self, rhs) -> np.ndarray:
        L = self.cholesky()
        return la.cho_solve((L, True), np.asarray(rhs, dtype=float))


def jittered_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    K = np.asarray(K, dtype=float)
    if not np.all(np.isfinite(K)):
        raise IllConditionedError("Gram matrix has non-finite entries")
    scale = float(np.mean(np.diag(K)))
    if not scale > 0:
        raise IllConditionedError(f"Gram matrix has non-positive mean diagonal {scale}")
    rel = JITTER_START
    eye = np.eye(K.shape[0])
    while rel <= JITTER_CAP * (1 + 1e-9):
        jitter = rel * scale
        try:
            return la.cholesky(K + jitter * eye, lower=True), jitter
        except la.LinAlgError:
            rel *= JITTER_FACTOR
    raise IllConditionedError(
        f"Cholesky failed with jitter up to {JITTER_CAP:g} * mean(diag) (n={K.shape[0]})"
    )


def symmetrize_upper(K: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle onto the lower one."""
    return np.triu(K) + np.triu(K, 1).T


def gram(spec: KernelSpec, points) -> GramMatrix:
    X = as_points(points, spec.dim)
    return GramMatrix(symmetrize_upper(kernel_matrix(spec, X, X)))
