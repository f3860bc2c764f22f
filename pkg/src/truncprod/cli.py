"""Command-line entry point: ``truncprod <subcommand> [options]``.

Exit codes: 0 success or all reports passed, 1 a statistical check failed,
2 usage or configuration error, 3 numerical-engine error.

Every option can also come from a configuration file (``--config``), one
``key = value`` pair per line, ``#`` starting a comment.  Options given on
the command line override the file.  Every output embeds the effective
configuration, so a run can be repeated from its output alone.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import asymptotics as asy
from . import harness
from ._io import dumps17
from .core import EnsembleParams, NumericalError, SingularPointError
from .finite_kernel import CorrelationRequest, build_kernel, correlation_k, density, kernel_eval, truncated_series
from .sampler import RngStream, stream_layout, write_samples_csv
from .weights import build_weight, weight_eval

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
COMMANDS = ("weight", "series", "kernel", "density", "correlate", "sample", "verify")
REGIMES = ("finite", "macro", "edge", "origin", "weak")
SUITES = ("default", "kostlan", "edge", "weak", "interior", "ginibre", "all")


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str) -> list[int]:
    parts = [t.strip() for t in s.split(",")]
    if not all(parts):
        raise ValueError(f"empty entry in integer list {s!r}")
    return [int(t) for t in parts]


def _parse_complex(s: str) -> complex:
    return complex(s.strip().replace(" ", ""))


def _parse_complex_list(s: str) -> list[complex]:
    parts = [t for t in s.split(";") if t.strip()]
    if not parts:
        raise ValueError("empty point list")
    return [_parse_complex(t) for t in parts]


def _parse_range(s: str) -> list[float]:
    vals = [float(t) for t in s.split(",")]
    if len(vals) != 2:
        raise ValueError("a range needs two comma-separated numbers")
    return vals


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, complex):
        return _fmt_complex(v)
    if isinstance(v, list):
        if v and isinstance(v[0], complex):
            return ";".join(_fmt_complex(z) for z in v)
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


# key -> parser; the order fixes the on-disk layout
SCHEMA: dict[str, Callable[[str], object]] = {
    "command": str, "N": int, "M": int, "L": _parse_int_list, "mu": float,
    "grid": int, "range": _parse_range, "regime": str, "x": _parse_complex,
    "u": _parse_complex, "v": _parse_complex, "points": _parse_complex_list,
    "samples": int, "suite": str, "seed": int, "threads": int, "out": str,
    "format": str, "allow_singular": _parse_bool, "edge_convention": str,
    "weak_argument": str, "upper": int,
}


@dataclass
class RunConfig:
    """Flat ``key = value`` configuration; keys are restricted to :data:`SCHEMA`."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                values[key] = SCHEMA[key](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        return cls(values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            return cls.from_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt_value(self.values[k])}\n" for k in SCHEMA if k in self.values)

    def merged(self, overrides: dict) -> "RunConfig":
        out = dict(self.values)
        out.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(out)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required option {key!r}")
        return self.values[key]


# ---------------------------------------------------------------- parameter helpers

def _truncations(cfg: RunConfig) -> tuple[int, list[int]]:
    ls = cfg.require("L")
    m = cfg.get("M")
    if m is None:
        m = len(ls)
    if len(ls) == 1:
        ls = ls * m
    if len(ls) != m:
        raise ConfigError(f"L lists {len(ls)} truncations but M = {m}")
    return m, ls


def _ensemble(cfg: RunConfig, need_n: bool = True) -> EnsembleParams:
    m, ls = _truncations(cfg)
    n = cfg.require("N") if need_n else cfg.get("N", 1)
    return EnsembleParams(n, m, tuple(ls))


def _strong(cfg: RunConfig) -> asy.StrongLimitParams:
    m = cfg.require("M")
    mu = cfg.get("mu")
    if mu is None:
        n, (l,) = cfg.require("N"), set(_truncations(cfg)[1])
        mu = n / (n + l)
    return asy.StrongLimitParams(mu, m)


def _grid(cfg: RunConfig, lo: float, hi: float, include_lo: bool) -> np.ndarray:
    """``lo + (hi - lo) k / grid``; an explicit ``range`` always includes its lower end."""
    g = cfg.get("grid", 100)
    if g < 1:
        raise ConfigError("grid must be at least 1")
    if "range" in cfg.values:
        lo, hi = cfg.values["range"]
        include_lo = True
    if not hi > lo:
        raise ConfigError("range must be increasing")
    k = np.arange(0 if include_lo else 1, g + 1)
    return lo + (hi - lo) * k / g


# ---------------------------------------------------------------- output

@dataclass
class Output:
    """Tabular result plus metadata, written as CSV or JSON."""

    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)


def _header(cfg: RunConfig, meta: dict) -> dict:
    head = {"config": cfg.values, "generated": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    head.update(meta)
    return head


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render(out: Output, cfg: RunConfig) -> str:
    head = _header(cfg, out.meta)
    if cfg.get("format", "csv") == "json":
        return dumps17({**head, "columns": out.columns, "rows": out.rows}) + "\n"
    buf = io.StringIO()
    for k, v in head.items():
        buf.write(f"# {k}: {dumps17(v, indent=0).replace(chr(10), '')}\n")
    buf.write(",".join(out.columns) + "\n")
    for row in out.rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, cfg: RunConfig) -> None:
    target = cfg.get("out", "-")
    if target == "-":
        sys.stdout.write(text)
    else:
        Path(target).write_text(text)


# ---------------------------------------------------------------- commands

def cmd_weight(cfg: RunConfig) -> int:
    params = _ensemble(cfg, need_n=False)
    w = build_weight(params)
    xs = _grid(cfg, 0.0, 1.0, include_lo=False)
    rows = [[x, float(weight_eval(w, x))] for x in xs]
    _emit(render(Output(["x", "omega"], rows, {"truncations": list(params.truncations)}), cfg), cfg)
    return EXIT_OK


def cmd_series(cfg: RunConfig) -> int:
    params = _ensemble(cfg)
    fk = build_kernel(params)
    x = cfg.require("x")
    upper = cfg.get("upper", params.n - 1)
    t = complex(truncated_series(fk, upper, x))
    _emit(render(Output(["x_re", "x_im", "upper", "t_re", "t_im"],
                        [[x.real, x.imag, upper, t.real, t.imag]]), cfg), cfg)
    return EXIT_OK


def cmd_kernel(cfg: RunConfig) -> int:
    fk = build_kernel(_ensemble(cfg))
    u, v = cfg.require("u"), cfg.require("v")
    k = complex(kernel_eval(fk, u, v))
    _emit(render(Output(["u_re", "u_im", "v_re", "v_im", "k_re", "k_im"],
                        [[u.real, u.imag, v.real, v.imag, k.real, k.imag]]), cfg), cfg)
    return EXIT_OK


def cmd_correlate(cfg: RunConfig) -> int:
    fk = build_kernel(_ensemble(cfg))
    pts = cfg.require("points")
    val = correlation_k(fk, CorrelationRequest(tuple(pts)))
    _emit(render(Output(["k", "r_k"], [[len(pts), float(val)]],
                        {"points": [[z.real, z.imag] for z in pts]}), cfg), cfg)
    return EXIT_OK


def _density_rows(xs, fn, allow_singular: bool) -> list[list]:
    rows = []
    for x in xs:
        try:
            val = float(fn(x))
        except SingularPointError:
            if not allow_singular:
                raise
            val = math.inf
        if math.isinf(val) and not allow_singular:
            raise SingularPointError(f"density is singular at {x!r}")
        rows.append([x, val])
    return rows


def cmd_density(cfg: RunConfig) -> int:
    regime = cfg.get("regime", "finite")
    allow = cfg.get("allow_singular", False)
    meta: dict = {"regime": regime}
    if regime == "finite":
        params = _ensemble(cfg)
        fk = build_kernel(params)
        xs = _grid(cfg, 0.0, 1.0, include_lo=False)
        rows = _density_rows(xs, lambda r: density(fk, r), allow)
        total = float(harness.radial_mass(params, np.array([0.0, 1.0]), fk)[0])
        meta.update(coordinate="|z|", normalization=total, expected_normalization=params.n)
        cols = ["r", "density"]
    elif regime == "macro":
        p = _strong(cfg)
        xs = _grid(cfg, 0.0, 1.0, include_lo=False)
        rows = _density_rows(xs, lambda r: asy.macro_density(p, r), allow)
        meta.update(coordinate="|z|", mu=p.mu, radius=p.radius)
        cols = ["r", "density"]
    elif regime == "edge":
        p = _strong(cfg)
        conv = cfg.get("edge_convention", "diagonal")
        xs = _grid(cfg, -3.0, 3.0, include_lo=True)
        rows = _density_rows(xs, lambda x: asy.edge_density(p, x, conv), allow)
        meta.update(coordinate="sqrt(N) (|z| - mu**(M/2))", mu=p.mu, edge_convention=conv)
        cols = ["x", "density"]
    elif regime == "origin":
        m = cfg.require("M")
        xs = _grid(cfg, 0.0, 3.0, include_lo=False)
        rows = _density_rows(xs, lambda d: asy.origin_density(m, d), allow)
        meta.update(coordinate="|dz| = L**(M/2) |z|")
        cols = ["dz", "density"]
    elif regime == "weak":
        wp = asy.WeakLimitParams.from_ensemble(_ensemble(cfg, need_n=False))
        arg = cfg.get("weak_argument", "sum")
        xs = _grid(cfg, 0.0, 10.0, include_lo=True)
        rows = _density_rows(xs, lambda x: asy.weak_density(wp, x, arg), allow)
        meta.update(coordinate="x = N (1 - |z|)", weak_argument=arg)
        cols = ["x", "density"]
    else:
        raise ConfigError(f"unknown regime {regime!r}; choose from {', '.join(REGIMES)}")
    _emit(render(Output(cols, rows, meta), cfg), cfg)
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    params = _ensemble(cfg)
    n = cfg.get("samples", 1)
    seed, threads = cfg.get("seed", 0), cfg.get("threads", 1)
    defaults = harness.load_defaults()
    spectra = harness.draw_spectra(params, n, RngStream(seed), threads, defaults["batch_size"])
    n_streams = len(stream_layout(n, defaults["batch_size"]))
    if cfg.get("format", "csv") == "json":
        rows = [[z.real, z.imag, i] for i, row in enumerate(spectra) for z in row]
        text = render(Output(["re", "im", "sample_index"], rows,
                             {"streams": n_streams, "batch_size": defaults["batch_size"]}), cfg)
    else:
        buf = io.StringIO()
        write_samples_csv(buf, spectra, params, seed, n_streams,
                          {"config": cfg.values, "batch_size": defaults["batch_size"],
                           "generated": _dt.datetime.now(_dt.timezone.utc).isoformat()})
        text = buf.getvalue()
    _emit(text, cfg)
    return EXIT_OK


def _suite_reports(cfg: RunConfig) -> list[Callable[[], harness.ComparisonReport]]:
    """Deferred report builders for the chosen suite."""
    suite = cfg.get("suite", "default")
    seed, threads = cfg.get("seed", 0), cfg.get("threads", 1)
    samples = cfg.get("samples")
    d = harness.load_defaults()

    def ens(n, m, l):
        vals = {"N": n, "M": m, "L": [l]}
        vals.update({k: cfg.get(k) for k in ("N", "M", "L") if cfg.get(k) is not None})
        return _ensemble(RunConfig(vals))

    runs = {
        "default": lambda: harness.run_density_comparison(
            ens(20, 2, 3), samples or 10000, d["density_bins"], RngStream(seed, 0), threads),
        "kostlan": lambda: harness.run_kostlan_comparison(
            ens(20, 2, 3), samples or 10000, RngStream(seed, 1), threads),
        "edge": lambda: harness.run_edge_profile(
            ens(100, 1, 100), samples or 10000, RngStream(seed, 2), threads),
        "weak": lambda: harness.run_weak_profile(
            ens(100, 1, 1), samples or 10000, RngStream(seed, 3), threads,
            argument=cfg.get("weak_argument", "sum")),
        "interior": lambda: _interior(ens(100, 1, 1), samples or 2000, seed, threads),
        "ginibre": lambda: harness.run_ginibre_crossover(
            cfg.get("N", 30), 20, cfg.get("M", 1), samples or 1000, RngStream(seed, 5), threads),
    }
    if suite == "all":
        return [runs[k] for k in ("default", "kostlan", "edge", "weak", "interior", "ginibre")]
    if suite not in runs:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return [runs[suite]]


def _interior(params: EnsembleParams, samples: int, seed: int, threads: int):
    big = EnsembleParams(4 * params.n, params.m, params.truncations)
    small = harness.draw_spectra(params, samples, RngStream(seed, 6), threads)
    large = harness.draw_spectra(big, max(samples // 8, 100), RngStream(seed, 7), threads)
    return harness.run_interior_fraction(small, large, params.m, sum(params.truncations))


def cmd_verify(cfg: RunConfig) -> int:
    reports = []
    status = EXIT_OK
    for build in _suite_reports(cfg):
        rep = build()
        reports.append(rep.to_dict())
        if not rep.passed and status == EXIT_OK:
            status = EXIT_FAIL
            sys.stderr.write(f"FAILED: {rep.test_name} ({', '.join(rep.failed_checks())})\n")
    head = _header(cfg, {"passed": status == EXIT_OK})
    _emit(dumps17({**head, "reports": reports}) + "\n", cfg)
    return status


HANDLERS = {"weight": cmd_weight, "series": cmd_series, "kernel": cmd_kernel,
            "density": cmd_density, "correlate": cmd_correlate, "sample": cmd_sample,
            "verify": cmd_verify}


# ---------------------------------------------------------------- argument parsing

def _arg_type(parser: Callable[[str], object]):
    def conv(s):
        try:
            return parser(s)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    conv.__name__ = getattr(parser, "__name__", "value")
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="key = value configuration file")
    g.add_argument("--seed", type=int, help="64-bit RNG seed (default 0)")
    g.add_argument("--threads", type=int, help="worker threads (default 1)")
    g.add_argument("--out", help="output file, '-' for stdout (default)")
    g.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")

    ens = argparse.ArgumentParser(add_help=False)
    e = ens.add_argument_group("ensemble")
    e.add_argument("--N", type=int, help="matrix size")
    e.add_argument("--M", type=int, help="number of factors")
    e.add_argument("--L", type=_arg_type(_parse_int_list),
                   help="truncation, or comma-separated truncations L_1,...,L_M")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", type=int, help="number of grid intervals (default 100)")
    grid.add_argument("--range", type=_arg_type(_parse_range), metavar="LO,HI",
                      help="coordinate range of the grid")

    parser = argparse.ArgumentParser(
        prog="truncprod", parents=[common],
        description="Eigenvalue statistics of products of truncated Haar unitaries.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    sub.add_parser("weight", parents=[common, ens, grid], help="one-point weight on x = k/grid")
    p = sub.add_parser("series", parents=[common, ens], help="truncated series T(x)")
    p.add_argument("--x", type=_arg_type(_parse_complex), help="complex argument, e.g. 0.3+0.1j")
    p.add_argument("--upper", type=int, help="highest power (default N-1)")
    p = sub.add_parser("kernel", parents=[common, ens], help="finite-N kernel K(u, v)")
    p.add_argument("--u", type=_arg_type(_parse_complex))
    p.add_argument("--v", type=_arg_type(_parse_complex))
    p = sub.add_parser("density", parents=[common, ens, grid], help="finite or limiting density")
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--mu", type=float, help="N/(N+L) for the macro and edge regimes")
    p.add_argument("--allow-singular", dest="allow_singular", action="store_const", const=True,
                   help="write inf at log-singular points instead of failing")
    p.add_argument("--edge-convention", dest="edge_convention", choices=("diagonal", "modulus"))
    p.add_argument("--weak-argument", dest="weak_argument", choices=("sum", "mean"))
    p = sub.add_parser("correlate", parents=[common, ens], help="k-point correlation R_k")
    p.add_argument("--points", type=_arg_type(_parse_complex_list),
                   help="semicolon-separated complex points")
    p = sub.add_parser("sample", parents=[common, ens], help="Monte Carlo spectra")
    p.add_argument("--samples", type=int)
    p = sub.add_parser("verify", parents=[common, ens], help="Monte Carlo verification suite")
    p.add_argument("--suite", choices=SUITES)
    p.add_argument("--samples", type=int, help="override the suite's sample count")
    p.add_argument("--weak-argument", dest="weak_argument", choices=("sum", "mean"))
    return parser


def _effective_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    given = {k: v for k, v in vars(args).items() if k != "config" and k in SCHEMA}
    cfg = base.merged(given)
    if cfg.get("command") not in COMMANDS:
        raise ConfigError("no subcommand given (on the command line or as 'command' in the config)")
    for key in ("seed", "threads", "samples", "grid"):
        val = cfg.get(key)
        if val is not None and val < (1 if key in ("threads", "samples", "grid") else 0):
            raise ConfigError(f"{key} out of range: {val}")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _effective_config(args)
        return HANDLERS[cfg.get("command")](cfg)
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
