"""Experiment runners behind the CLI, and the CSV record format they emit.

Every runner is a pure function of its arguments (seeds included) and
returns rows in a deterministic order, so re-running a command reproduces
its CSV byte for byte.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, fields

import numpy as np

from . import discrepancy as disc
from . import targets as tg
from .exceptions import IllConditionedError, NumericalError
from .kernels import KernelSpec
from .quantize import (
    GreedyConfig,
    KSDObjective,
    greedy_select,
    grid_pool,
    optimal_weights_mmd,
    stein_thin,
    stein_weights,
)
from .stein import SteinKernel, stein_gram

log = logging.getLogger(__name__)

METHODS = ("mc_uniform", "opt_weights", "greedy", "thinned", "bbis")
FAILED = "failed"


def fmt_float(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    method: str
    kernel: str
    target: str
    n: int | float  # sample size, or the offset c in the pathology study
    seed: int
    value: float  # NaN on failed rows
    aux: str  # "failed", or ';'-joined key=value pairs

    @property
    def failed(self) -> bool:
        return self.aux == FAILED

    def to_row(self) -> list[str]:
        n = str(self.n) if isinstance(self.n, (int, np.integer)) else fmt_float(self.n)
        return [self.experiment, self.method, self.kernel, self.target, n, str(self.seed),
                fmt_float(self.value), self.aux]

    @classmethod
    def from_row(cls, row: list[str]) -> "ExperimentRecord":
        if len(row) != len(HEADER):
            raise ValueError(f"expected {len(HEADER)} columns, got {len(row)}")
        experiment, method, kernel, target, n, seed, value, aux = row
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        n_val: int | float = float(n) if any(ch in n for ch in ".eEn") else int(n)
        rec = cls(experiment, method, kernel, target, n_val, int(seed), float(value), aux)
        if not rec.failed and not rec.value >= 0:
            raise ValueError(f"negative or missing value in {row}")
        if not all(str(getattr(rec, f.name)) for f in fields(rec)):
            raise ValueError(f"unpopulated field in {row}")
        return rec


HEADER = [f.name for f in fields(ExperimentRecord)]


def parse_aux(aux: str) -> dict[str, str]:
    if aux == FAILED:
        return {FAILED: "1"}
    return dict(item.split("=", 1) for item in aux.split(";") if item)


def render_csv(header: list[str], rows: list[list[str]], comments: list[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def records_to_csv(records: list[ExperimentRecord], comments: list[str] = ()) -> str:
    return render_csv(HEADER, [r.to_row() for r in records], comments)


def read_csv_rows(text: str) -> tuple[list[str], list[list[str]]]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


def records_from_csv(text: str) -> list[ExperimentRecord]:
    header, rows = read_csv_rows(text)
    if header != HEADER:
        raise ValueError(f"unexpected header {header}")
    return [ExperimentRecord.from_row(r) for r in rows]


def sort_records(records):
    # Slope summaries carry experiment "<name>-slope" and sort after the rows they summarise.
    return sorted(records, key=lambda r: (r.experiment.endswith("-slope"), r.n, r.seed, r.method, r.kernel))


def fit_slope(ns, values) -> float:
    """OLS slope of ``log value`` against ``log n``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size < 2:
        return math.nan
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def slope_records(records: list[ExperimentRecord], experiment: str, n_min: float) -> list[ExperimentRecord]:
    """One row per (method, kernel): log-log slope of the seed-mean over ``n >= n_min``.

    Failed rows are ignored. The row's value is the seed-mean at the largest n.
    """
    out = []
    groups: dict[tuple[str, str, str], dict] = {}
    for r in records:
        if r.failed or r.experiment != experiment:
            continue
        groups.setdefault((r.method, r.kernel, r.target), {}).setdefault(r.n, []).append(r.value)
    for (method, kernel, target), by_n in sorted(groups.items()):
        ns = sorted(n for n in by_n if n >= n_min)
        means = [float(np.mean(by_n[n])) for n in ns]
        if len(ns) < 2:
            continue
        slope = fit_slope(ns, means)
        first_seed = min(r.seed for r in records if r.experiment == experiment)
        out.append(ExperimentRecord(f"{experiment}-slope", method, kernel, target, int(ns[-1]), first_seed,
                                    means[-1], f"slope={fmt_float(slope)};n_min={int(n_min)};points={len(ns)}"))
    return out


def powers_of_two(lo: int, hi: int) -> list[int]:
    out = []
    n = lo
    while n <= hi:
        out.append(n)
        n *= 2
    return out


def run_rates(orders=(1, 2, 3), n_grid=None, seeds=range(20), n_max: int = 1024,
              methods=("mc_uniform", "opt_weights")) -> list[ExperimentRecord]:
    """MMD of uniform and optimally weighted prefixes of stored uniform sequences.

    For each seed one sequence of ``n_max`` draws from U([0,1]) is generated;
    every ``n`` uses its first ``n`` states. Slopes are fitted over
    ``n >= n_max / 4``.
    """
    n_grid = sorted(n_grid) if n_grid is not None else powers_of_two(16, n_max)
    n_max = max(n_grid)
    target = tg.uniform_unit_cube(1)
    records = []
    for seed in seeds:
        xs = tg.sample(target, n_max, seed)
        for s in orders:
            spec = KernelSpec(f"wendland{s}")
            kf, tf = spec.to_fragment(), target.to_fragment()
            for n in n_grid:
                X = xs[:n]
                if "mc_uniform" in methods:
                    value = disc.mmd(target, spec, X)
                    records.append(ExperimentRecord("rates", "mc_uniform", kf, tf, n, seed, value, "jitter=0.0"))
                if "opt_weights" in methods:
                    try:
                        w, G = optimal_weights_mmd(target, spec, X, return_gram=True)
                        value = math.sqrt(disc.mmd_squared(target, spec, X, w, K=G.entries))
                        aux = f"jitter={fmt_float(G.jitter_used)}"
                    except (IllConditionedError, NumericalError) as exc:
                        log.warning("rates: s=%d n=%d seed=%d failed: %s", s, n, seed, exc)
                        value, aux = math.nan, FAILED
                    records.append(ExperimentRecord("rates", "opt_weights", kf, tf, n, seed, value, aux))
    records = sort_records(records)
    return records + slope_records(records, "rates", n_max / 4)


def run_bias_correct(n_grid, seeds=range(20), kernel: KernelSpec | None = None) -> list[ExperimentRecord]:
    """Uniform-weight KSD against sum-to-one optimal Stein weights on i.i.d. N(0,1) prefixes."""
    kernel = kernel or KernelSpec("imq", 1, sigma=1.0, beta=0.5)
    target = tg.std_gaussian(kernel.dim)
    sk = SteinKernel(kernel, target)
    n_grid = sorted(n_grid)
    records = []
    kf, tf = kernel.to_fragment(), target.to_fragment()
    for seed in seeds:
        xs = tg.sample(target, max(n_grid), seed)
        for n in n_grid:
            X = xs[:n]
            G = stein_gram(sk, X)
            uniform = disc.ksd(G, np.full(n, 1.0 / n))
            records.append(ExperimentRecord("bias-correct", "mc_uniform", kf, tf, n, seed, uniform, "jitter=0.0"))
            t0 = time.perf_counter()
            try:
                w, Gd = stein_weights(sk, X, return_gram=True)
                # Duplicates carry zero weight, so the full Gram gives the same quadratic form.
                opt = disc.ksd(G, w)
                aux = f"jitter={fmt_float(Gd.jitter_used)};dominates={int(opt <= uniform + 1e-12)}"
            except (IllConditionedError, NumericalError) as exc:
                log.warning("bias-correct: n=%d seed=%d failed: %s", n, seed, exc)
                opt, aux = math.nan, FAILED
            log.debug("bias-correct n=%d seed=%d solve %.4fs", n, seed, time.perf_counter() - t0)
            records.append(ExperimentRecord("bias-correct", "bbis", kf, tf, n, seed, opt, aux))
    return sort_records(records)


def run_pathology(c_grid, n: int = 100, seed: int = 0, kernel: KernelSpec | None = None) -> list[ExperimentRecord]:
    """KSD of one fixed N(0,1) sample against the two-component mixture, per offset c."""
    kernel = kernel or KernelSpec("imq", 1, sigma=1.0, beta=0.5)
    xs = tg.sample(tg.std_gaussian(1), n, seed)
    w = np.full(n, 1.0 / n)
    records = []
    for c in c_grid:
        target = tg.gauss_mixture_1d(float(c))
        value = disc.ksd(stein_gram(SteinKernel(kernel, target), xs), w)
        records.append(ExperimentRecord("pathology", "mc_uniform", kernel.to_fragment(), target.to_fragment(),
                                        float(c), seed, value, f"n={n}"))
    return records


def flatness(records: list[ExperimentRecord], c_min: float) -> float:
    """Largest relative change per unit c between consecutive grid points with ``c >= c_min``."""
    pts = sorted((r.n, r.value) for r in records if r.n >= c_min)
    worst = 0.0
    for (c0, v0), (c1, v1) in zip(pts[:-1], pts[1:]):
        worst = max(worst, abs(v1 - v0) / v0 / (c1 - c0))
    return worst


def parse_pool(spec: str, dim: int, target: tg.Target, seed: int) -> np.ndarray:
    """``grid:LO,HI,COUNT`` (product grid, COUNT per axis) or ``sample:COUNT`` (i.i.d. from target)."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "grid":
            lo, hi, count = rest.split(",")
            return grid_pool(float(lo), float(hi), int(count), dim)
        if kind == "sample":
            return tg.sample(target, int(rest), seed)
    except ValueError:
        pass
    raise ValueError(f"bad pool spec {spec!r}; use grid:LO,HI,COUNT or sample:COUNT")


def run_stein_points(target: tg.Target, kernel: KernelSpec, m: int, pool: np.ndarray,
                     distinct: bool = False) -> tuple[list[str], list[list[str]]]:
    """Greedy KSD points; rows ``step,index,x1..xd,ksd`` with the prefix KSD."""
    sk = SteinKernel(kernel, target)
    res = greedy_select(GreedyConfig(m, pool, KSDObjective(sk), distinct=distinct))
    G = stein_gram(sk, res.points)
    rows = []
    for step in range(1, m + 1):
        value = disc.ksd(G.entries[:step, :step], np.full(step, 1.0 / step))
        rows.append([str(step), str(res.indices[step - 1]), *map(fmt_float, res.points[step - 1]), fmt_float(value)])
    header = ["step", "index", *[f"x{j + 1}" for j in range(kernel.dim)], "ksd"]
    return header, rows


def run_thin(chain: np.ndarray, scores, target: tg.Target, kernel: KernelSpec, m: int,
             distinct: bool = False, optimal: bool = False) -> tuple[list[str], list[list[str]]]:
    """Stein thinning of a chain; rows ``step,index,x1..xd,weight``.

    Weights are ``1/m`` per step, or with ``optimal`` the sum-to-one Stein
    weights of the selected states (repeat selections carry weight 0).
    """
    sk = SteinKernel(kernel, target)
    idx = stein_thin(chain, sk, m, scores=scores, distinct=distinct)
    if optimal:
        sel_scores = None if scores is None else np.asarray(scores)[idx]
        weights = stein_weights(sk, chain[idx], scores=sel_scores)
    else:
        weights = np.full(m, 1.0 / m)
    rows = [[str(s + 1), str(i), *map(fmt_float, chain[i]), fmt_float(w)] for s, (i, w) in enumerate(zip(idx, weights))]
    header = ["step", "index", *[f"x{j + 1}" for j in range(chain.shape[1])], "weight"]
    return header, rows


REPORT_HEADER = ["metric", "n", "d", "value", "aux"]


def run_star_disc(points: np.ndarray, grid_kind: str | None = None) -> list[list[str]]:
    """Star discrepancy report; for generated grids the regular-grid bound is checked.

    Midpoint grids assert the bound; endpoint grids only report it.
    """
    n, d = points.shape
    value = disc.star_discrepancy(points)
    aux = "-"
    if grid_kind is not None:
        lo, hi = disc.grid_bounds(n, d)
        holds = lo - 1e-12 <= value <= hi + 1e-12
        aux = f"grid={grid_kind};lower={fmt_float(lo)};upper={fmt_float(hi)};within={int(holds)}"
    return [["star_discrepancy", str(n), str(d), fmt_float(value), aux]]
