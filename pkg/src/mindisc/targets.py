"""Target distributions: samplers, scores, and closed-form kernel embeddings.

Random streams come from ``numpy.random.default_rng(seed)`` (PCG64). A given
``(target, n, seed)`` therefore always yields the same points.

The normalising constant of a density is never computed; only the
unnormalised log-density and its gradient (the score) are exposed.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import DomainError, UnsupportedError
from .kernels import KernelSpec, as_points, parse_fragment

TARGET_FAMILIES = ("uniform_unit_cube", "std_gaussian", "gauss_mixture_1d")

# Each mixture component exp(-(x - m)^2) is the N(m, 1/2) shape.
MIXTURE_COMPONENT_SD = np.sqrt(0.5)

_WENDLAND_EMBEDDINGS = {
    "wendland1": np.polynomial.Polynomial([0.5, 1.0, -1.0]),
    "wendland2": np.polynomial.Polynomial([2 / 5, 1.0, 0.0, -2.0, 1.0]),
    "wendland3": np.polynomial.Polynomial([1 / 3, 1.0, 0.0, -7 / 3, 0.0, 7.0, -35 / 3, 8.0, -2.0]),
}
_WENDLAND_DOUBLE = {"wendland1": 2 / 3, "wendland2": 3 / 5, "wendland3": 19 / 36}


@dataclass(frozen=True)
class Target:
    family: str
    dim: int = 1
    c: float | None = None

    def __post_init__(self):
        if self.family not in TARGET_FAMILIES:
            raise ValueError(f"unknown target family {self.family!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.family == "gauss_mixture_1d":
            if self.dim != 1:
                raise ValueError("gauss_mixture_1d has dim 1")
            c = 0.0 if self.c is None else float(self.c)
            if not c >= 0:
                raise ValueError(f"mixture offset c must be >= 0, got {c}")
            object.__setattr__(self, "c", c)
        elif self.c is not None:
            raise ValueError(f"{self.family} takes no c")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def can_sample(self) -> bool:
        return True

    @property
    def has_score(self) -> bool:
        return self.family != "uniform_unit_cube"

    def has_embedding(self, spec: KernelSpec) -> bool:
        if spec.dim != self.dim:
            return False
        if self.family == "uniform_unit_cube":
            return self.dim == 1 and spec.family in _WENDLAND_EMBEDDINGS
        if self.family == "std_gaussian":
            return spec.family == "gaussian"
        return False

    has_double_integral = has_embedding

    def to_fragment(self) -> str:
        if self.family == "gauss_mixture_1d":
            return f"target={self.family} c={self.c!r}"
        return f"target={self.family} dim={self.dim}"

    @classmethod
    def from_fragment(cls, text: str) -> "Target":
        fields = parse_fragment(text)
        if "target" not in fields:
            raise ValueError(f"target fragment {text!r} lacks target=")
        unknown = set(fields) - {"target", "dim", "c"}
        if unknown:
            raise ValueError(f"unknown target keys: {sorted(unknown)}")
        try:
            kwargs: dict = {"family": fields["target"]}
            if "dim" in fields:
                kwargs["dim"] = int(fields["dim"])
            if "c" in fields:
                kwargs["c"] = float(fields["c"])
        except ValueError as exc:
            raise ValueError(f"bad target fragment {text!r}: {exc}") from None
        return cls(**kwargs)


def uniform_unit_cube(dim: int = 1) -> Target:
    return Target("uniform_unit_cube", dim)


def std_gaussian(dim: int = 1) -> Target:
    return Target("std_gaussian", dim)


def gauss_mixture_1d(c: float) -> Target:
    return Target("gauss_mixture_1d", 1, c)


def _batch(x, dim: int) -> tuple[np.ndarray, bool]:
    # A scalar, or a 1-d vector when dim > 1, is a single point.
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and dim > 1)
    return as_points(x, dim), single


def sample(target: Target, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. points, shape ``(n, dim)``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if target.family == "uniform_unit_cube":
        return rng.random((n, target.dim))
    if target.family == "std_gaussian":
        return rng.standard_normal((n, target.dim))
    component = rng.integers(0, 2, size=n)
    noise = rng.standard_normal(n) * MIXTURE_COMPONENT_SD
    return (component * target.c + noise).reshape(n, 1)


def score(target: Target, x) -> np.ndarray:
    """Gradient of the log-density; rows of ``x`` map to rows of the output.

    A single point returns a vector, a batch returns an ``(n, d)`` array.
    """
    if not target.has_score:
        raise UnsupportedError("score is undefined for the uniform target")
    X, single = _batch(x, target.dim)
    if target.family == "std_gaussian":
        out = -X
    else:
        c = target.c
        # Posterior weight of the component centred at c.
        w = expit(2.0 * c * X - c * c)
        out = -2.0 * (X - c * w)
    return out[0] if single else out


def log_density_unnorm(target: Target, x) -> np.ndarray | float:
    """Unnormalised log-density with a fixed additive convention per family."""
    X, single = _batch(x, target.dim)
    if target.family == "uniform_unit_cube":
        if np.any(X < 0) or np.any(X > 1):
            raise DomainError("point outside the unit cube")
        out = np.zeros(X.shape[0])
    elif target.family == "std_gaussian":
        out = -0.5 * np.sum(X * X, axis=1)
    else:
        x0 = X[:, 0]
        out = np.logaddexp(-x0 * x0, -(x0 - target.c) ** 2)
    return float(out[0]) if single else out


def _require_embedding(target: Target, spec: KernelSpec) -> None:
    if not target.has_embedding(spec):
        raise UnsupportedError(
            f"no closed-form embedding for ({target.to_fragment()}, {spec.to_fragment()}); "
            "use mindisc.oracle.embedding_quadrature"
        )


def mean_embedding(target: Target, spec: KernelSpec, x) -> np.ndarray | float:
    """Closed-form ``mu_P(x) = E_{Y~P} k(x, Y)``."""
    _require_embedding(target, spec)
    X, single = _batch(x, target.dim)
    if target.family == "uniform_unit_cube":
        if np.any(X < 0) or np.any(X > 1):
            raise DomainError(f"{spec.family} embedding requires x in [0, 1]")
        out = _WENDLAND_EMBEDDINGS[spec.family](X[:, 0])
    else:
        s2 = spec.sigma**2
        out = (s2 / (2.0 + s2)) ** (target.dim / 2) * np.exp(-np.sum(X * X, axis=1) / (2.0 + s2))
    return float(out[0]) if single else out


def kernel_double_integral(target: Target, spec: KernelSpec) -> float:
    """``E k(X, Y)`` for independent ``X, Y ~ P``."""
    _require_embedding(target, spec)
    if target.family == "uniform_unit_cube":
        return _WENDLAND_DOUBLE[spec.family]
    s2 = spec.sigma**2
    return (s2 / (4.0 + s2)) ** (target.dim / 2)


def read_points_csv(source) -> tuple[np.ndarray, np.ndarray | None]:
    """Read ``x1..xd[,s1..sd]`` CSV; returns ``(points, scores or None)``.

    ``source`` is a path or an open text stream.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty point file")
    header = [h.strip() for h in rows[0]]
    xs = [i for i, h in enumerate(header) if h.startswith("x")]
    ss = [i for i, h in enumerate(header) if h.startswith("s")]
    d = len(xs)
    if d == 0 or header[:d] != [f"x{j + 1}" for j in range(d)]:
        raise ValueError(f"header must start with x1..xd, got {header}")
    if ss and header[d:] != [f"s{j + 1}" for j in range(d)]:
        raise ValueError(f"score columns must be s1..s{d}, got {header[d:]}")
    if len(header) not in (d, 2 * d):
        raise ValueError(f"unexpected columns in header {header}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if data.size == 0:
        raise ValueError("point file has no rows")
    if data.shape[1] != len(header):
        raise ValueError("ragged point file")
    return data[:, :d], (data[:, d:] if ss else None)


def write_points_csv(path, points, scores=None) -> None:
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    header = [f"x{j + 1}" for j in range(d)]
    body = points
    if scores is not None:
        header += [f"s{j + 1}" for j in range(d)]
        body = np.hstack([points, np.asarray(scores, dtype=float)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in body:
            w.writerow([repr(float(v)) for v in row])
