"""Command-line driver: ``mindisc <command> [options]``.

Each command writes a CSV (to ``--out`` or stdout) whose leading ``#`` lines
echo the resolved configuration. Options resolve as command-line flag, then
``--config`` file (``key=value`` lines, keys spelled like the long flags),
then built-in default.

Exit codes: 0 success, 2 invalid configuration, 3 more numerical failures
than ``--max-failures``.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time

import numpy as np

from . import discrepancy as disc
from . import experiments as ex
from . import targets as tg
from .exceptions import DomainError, IllConditionedError, NumericalError, UnsupportedError
from .kernels import KernelSpec
from .quantize import optimal_weights_mmd, stein_weights
from .stein import SteinKernel, stein_gram

log = logging.getLogger("mindisc")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
RATES_GUARD = 1024
BIAS_GUARD = 200

IMQ = "family=imq sigma=1.0 beta=0.5 dim=1"

DEFAULTS = {
    "common": {"seed": 0, "max_failures": 0, "verbose": False},
    "rates": {"orders": "1,2,3", "n_max": 1024, "n_seeds": 20, "force": False},
    "stein-points": {"target": "target=std_gaussian dim=1", "kernel": IMQ, "m": 8, "pool": None,
                     "distinct": False},
    "thin": {"target": "target=std_gaussian dim=1", "kernel": IMQ, "m": 8, "distinct": False,
             "optimal_weights": False},
    "bias-correct": {"kernel": IMQ, "n_grid": "10:100:10", "n_seeds": 20, "force": False},
    "pathology": {"kernel": IMQ, "c_grid": "0:10:0.5", "n": 100},
    "star-disc": {"grid": None, "per_axis": 4, "dim": 1},
    "weights": {"method": "mmd", "target": "target=uniform_unit_cube dim=1",
                "kernel": "family=wendland1 dim=1"},
}

# Not echoed: where output goes has no bearing on its content.
NOT_ECHOED = {"out", "plot", "config", "verbose", "command"}


class ConfigError(ValueError):
    pass


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_grid(text: str, kind=float) -> list:
    """``a,b,c`` or inclusive ``start:stop:step``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [start + i * step for i in range(count)]
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use a,b,c or start:stop:step") from None
    if not vals:
        raise ConfigError("empty grid")
    if kind is int:
        if any(v != int(v) for v in vals):
            raise ConfigError(f"grid {text!r} must be integers")
        return [int(v) for v in vals]
    return [round(v, 12) for v in vals]


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--config", help="file of key=value lines")
    p.add_argument("--plot", help="also write a plot (format from extension, e.g. .svg)")
    p.add_argument("--max-failures", type=int, help="tolerated jitter-cap failures (default 0)")
    p.add_argument("-v", "--verbose", action="store_const", const=True, help="log progress to stderr")


def flag(p, name, help_text):
    p.add_argument(name, action="store_const", const=True, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mindisc", description="Minimum-discrepancy quantisation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="MMD of uniform and optimal weights on the unit interval")
    add_common(p)
    p.add_argument("--orders", help="Wendland orders, e.g. 1,2,3")
    p.add_argument("--n-max", type=int, help=f"largest n; grid is 16, 32, ... (guard {RATES_GUARD})")
    p.add_argument("--n-seeds", type=int, help="number of seeds, starting at --seed")
    flag(p, "--force", "lift the n-max guard")

    p = sub.add_parser("stein-points", help="greedy KSD points from a candidate pool")
    add_common(p)
    p.add_argument("--target")
    p.add_argument("--kernel")
    p.add_argument("--m", type=int, help="number of points")
    p.add_argument("--pool", help="grid:LO,HI,COUNT or sample:COUNT")
    flag(p, "--distinct", "forbid repeated selections")

    p = sub.add_parser("thin", help="Stein thinning of a chain file")
    add_common(p)
    p.add_argument("--chain", help="CSV with x1..xd[,s1..sd]")
    p.add_argument("--target")
    p.add_argument("--kernel")
    p.add_argument("--m", type=int)
    flag(p, "--distinct", "forbid repeated selections")
    flag(p, "--optimal-weights", "report optimal Stein weights instead of 1/m")

    p = sub.add_parser("bias-correct", help="uniform vs optimal Stein weights on N(0,1) samples")
    add_common(p)
    p.add_argument("--kernel")
    p.add_argument("--n-grid", help=f"sample sizes, a,b,c or start:stop:step (guard {BIAS_GUARD})")
    p.add_argument("--n-seeds", type=int)
    flag(p, "--force", "lift the sample-size guard")

    p = sub.add_parser("pathology", help="KSD of an N(0,1) sample against a two-bump mixture")
    add_common(p)
    p.add_argument("--kernel")
    p.add_argument("--c-grid", help="offsets, a,b,c or start:stop:step")
    p.add_argument("--n", type=int, help="sample size")

    p = sub.add_parser("star-disc", help="star discrepancy of a point file or generated grid")
    add_common(p)
    p.add_argument("--points", help="CSV with x1..xd")
    p.add_argument("--grid", choices=["midpoint", "endpoint"])
    p.add_argument("--per-axis", type=int)
    p.add_argument("--dim", type=int)

    p = sub.add_parser("weights", help="optimal weights for a point file")
    add_common(p)
    p.add_argument("--points", help="CSV with x1..xd[,s1..sd]")
    p.add_argument("--method", choices=["mmd", "ksd"])
    p.add_argument("--target")
    p.add_argument("--kernel")
    return parser


def _converters(parser: argparse.ArgumentParser, command: str) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    out = {}
    for action in sub.choices[command]._actions:
        if isinstance(action, argparse._StoreConstAction):
            out[action.dest] = parse_bool
        elif action.choices:
            def check(v, choices=action.choices):
                if v not in choices:
                    raise ConfigError(f"{v!r} not in {list(choices)}")
                return v
            out[action.dest] = check
        else:
            out[action.dest] = action.type or str
    return out


def resolve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    cfg = {**DEFAULTS["common"], **DEFAULTS[args.command]}
    if args.config:
        conv = _converters(parser, args.command)
        for key, raw in read_config(args.config).items():
            if key not in conv or key in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            try:
                cfg[key] = conv[key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
    for key, value in vars(args).items():
        if value is not None:
            cfg[key] = value
    return cfg


def echo(cfg: dict) -> list[str]:
    return [f"{k}={cfg[k]}" for k in sorted(cfg) if k not in NOT_ECHOED and cfg[k] is not None]


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def seeds(cfg) -> list[int]:
    if cfg["n_seeds"] < 1:
        raise ConfigError("n_seeds must be >= 1")
    return list(range(cfg["seed"], cfg["seed"] + cfg["n_seeds"]))


def count_failures(records) -> int:
    return sum(r.failed for r in records)


def cmd_rates(cfg):
    orders = parse_grid(cfg["orders"], int)
    if any(s not in (1, 2, 3) for s in orders):
        raise ConfigError("orders must be among 1, 2, 3")
    if cfg["n_max"] < 32:
        raise ConfigError("n_max must be >= 32")
    if cfg["n_max"] > RATES_GUARD and not cfg["force"]:
        raise ConfigError(f"n_max > {RATES_GUARD} needs --force")
    n_grid = ex.powers_of_two(16, cfg["n_max"])
    records = ex.run_rates(orders, n_grid, seeds(cfg))
    for r in records:
        if r.experiment == "rates-slope":
            log.info("slope %s %s: %s", r.method, r.kernel, ex.parse_aux(r.aux)["slope"])
    return ex.records_to_csv(records, echo(cfg)), count_failures(records)


def cmd_bias_correct(cfg):
    n_grid = parse_grid(cfg["n_grid"], int)
    if min(n_grid) < 1:
        raise ConfigError("sample sizes must be >= 1")
    if max(n_grid) > BIAS_GUARD and not cfg["force"]:
        raise ConfigError(f"sample sizes above {BIAS_GUARD} need --force")
    kernel = KernelSpec.from_fragment(cfg["kernel"])
    t0 = time.perf_counter()
    records = ex.run_bias_correct(n_grid, seeds(cfg), kernel)
    # Runtime stays out of the CSV so that reruns are byte-identical.
    max_jitter = max((float(ex.parse_aux(r.aux).get("jitter", 0.0)) for r in records if not r.failed), default=0.0)
    print(f"mindisc: bias-correct runtime {time.perf_counter() - t0:.3f}s, max jitter_used {max_jitter!r}",
          file=sys.stderr)
    return ex.records_to_csv(records, echo(cfg)), count_failures(records)


def cmd_pathology(cfg):
    kernel = KernelSpec.from_fragment(cfg["kernel"])
    if kernel.dim != 1:
        raise ConfigError("pathology study is one-dimensional")
    c_grid = parse_grid(cfg["c_grid"])
    if min(c_grid) < 0:
        raise ConfigError("offsets must be >= 0")
    if cfg["n"] < 1:
        raise ConfigError("n must be >= 1")
    records = ex.run_pathology(c_grid, cfg["n"], cfg["seed"], kernel)
    return ex.records_to_csv(records, echo(cfg)), 0


def _target_kernel(cfg):
    target = tg.Target.from_fragment(cfg["target"])
    kernel = KernelSpec.from_fragment(cfg["kernel"])
    if kernel.dim != target.dim:
        raise ConfigError(f"kernel dim {kernel.dim} differs from target dim {target.dim}")
    return target, kernel


def cmd_stein_points(cfg):
    target, kernel = _target_kernel(cfg)
    if cfg["pool"] is None:
        cfg["pool"] = "grid:-4,4,2001" if target.dim == 1 else "grid:-4,4,161"
    pool = ex.parse_pool(cfg["pool"], target.dim, target, cfg["seed"])
    header, rows = ex.run_stein_points(target, kernel, cfg["m"], pool, cfg["distinct"])
    return ex.render_csv(header, rows, echo(cfg)), 0


def cmd_thin(cfg):
    if not cfg.get("chain"):
        raise ConfigError("thin needs --chain")
    target, kernel = _target_kernel(cfg)
    chain, scores = tg.read_points_csv(cfg["chain"])
    if chain.shape[1] != target.dim:
        raise ConfigError(f"chain has dim {chain.shape[1]}, target has dim {target.dim}")
    header, rows = ex.run_thin(chain, scores, target, kernel, cfg["m"], cfg["distinct"], cfg["optimal_weights"])
    return ex.render_csv(header, rows, echo(cfg)), 0


def cmd_star_disc(cfg):
    if bool(cfg.get("points")) == bool(cfg["grid"]):
        raise ConfigError("star-disc needs exactly one of --points or --grid")
    if cfg["grid"]:
        if cfg["per_axis"] < 1 or cfg["dim"] < 1:
            raise ConfigError("per_axis and dim must be >= 1")
        make = disc.midpoint_grid if cfg["grid"] == "midpoint" else disc.endpoint_grid
        points = make(cfg["per_axis"], cfg["dim"])
    else:
        points, _ = tg.read_points_csv(cfg["points"])
    rows = ex.run_star_disc(points, cfg["grid"])
    return ex.render_csv(ex.REPORT_HEADER, rows, echo(cfg)), 0


def cmd_weights(cfg):
    if not cfg.get("points"):
        raise ConfigError("weights needs --points")
    target, kernel = _target_kernel(cfg)
    points, scores = tg.read_points_csv(cfg["points"])
    failures = 0
    try:
        if cfg["method"] == "mmd":
            w, G = optimal_weights_mmd(target, kernel, points, return_gram=True)
            value = math.sqrt(disc.mmd_squared(target, kernel, points, w))
        else:
            sk = SteinKernel(kernel, target)
            w, G = stein_weights(sk, points, scores=scores, return_gram=True)
            value = disc.ksd(stein_gram(sk, points, scores), w)
        jitter = G.jitter_used
    except IllConditionedError as exc:
        log.error("weights: %s", exc)
        w, value, jitter, failures = np.full(points.shape[0], math.nan), math.nan, math.nan, 1
    comments = echo(cfg) + [f"discrepancy={ex.fmt_float(value)}", f"jitter={ex.fmt_float(jitter)}"]
    header = ["index", *[f"x{j + 1}" for j in range(points.shape[1])], "weight"]
    rows = [[str(i), *map(ex.fmt_float, p), ex.fmt_float(wi)] for i, (p, wi) in enumerate(zip(points, w))]
    return ex.render_csv(header, rows, comments), failures


COMMANDS = {
    "rates": cmd_rates,
    "stein-points": cmd_stein_points,
    "thin": cmd_thin,
    "bias-correct": cmd_bias_correct,
    "pathology": cmd_pathology,
    "star-disc": cmd_star_disc,
    "weights": cmd_weights,
}


def plot_csv(command: str, csv_path: str, plot_path: str) -> None:
    """Draw a figure from a CSV written by ``command``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path) as fh:
        text = fh.read()
    fig, ax = plt.subplots(figsize=(6, 4))
    if command in ("rates", "bias-correct", "pathology"):
        records = [r for r in ex.records_from_csv(text) if not r.experiment.endswith("-slope") and not r.failed]
        groups: dict = {}
        for r in records:
            groups.setdefault((r.method, r.kernel), {}).setdefault(r.n, []).append(r.value)
        for (method, kernel), by_n in sorted(groups.items()):
            ns = sorted(by_n)
            ax.plot(ns, [np.mean(by_n[n]) for n in ns], marker="o", ms=3, label=f"{method} [{kernel}]")
        if command == "pathology":
            ax.set_xlabel("c")
            ax.set_ylabel("KSD")
        else:
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("n")
            ax.set_ylabel("mean discrepancy")
        ax.legend(fontsize=6)
    elif command in ("stein-points", "thin", "weights"):
        header, rows = ex.read_csv_rows(text)
        data = np.array(rows, dtype=float)
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        if len(xcols) == 1:
            ax.plot(data[:, xcols[0]], np.zeros(len(data)), "o")
            ax.set_xlabel("x1")
        else:
            ax.plot(data[:, xcols[0]], data[:, xcols[1]], "o")
            for row in data[:8]:
                ax.annotate(str(int(row[0])), (row[xcols[0]], row[xcols[1]]), fontsize=6)
            ax.set_aspect("equal")
    else:
        header, rows = ex.read_csv_rows(text)
        ax.bar([r[0] for r in rows], [float(r[3]) for r in rows])
        ax.set_ylabel("star discrepancy")
    fig.tight_layout()
    fig.savefig(plot_path)
    plt.close(fig)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = resolve(parser, args)
        text, failures = COMMANDS[args.command](cfg)
    except (ConfigError, DomainError, UnsupportedError, ValueError, KeyError, OSError) as exc:
        print(f"mindisc: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IllConditionedError, NumericalError) as exc:
        print(f"mindisc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    emit(text, cfg.get("out"))
    if cfg.get("plot"):
        if not cfg.get("out"):
            print("mindisc: --plot needs --out (plots are drawn from the written CSV)", file=sys.stderr)
            return EXIT_CONFIG
        plot_csv(args.command, cfg["out"], cfg["plot"])
    if failures > cfg["max_failures"]:
        print(f"mindisc: {failures} numerical failures exceed --max-failures={cfg['max_failures']}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
