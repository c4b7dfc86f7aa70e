"""Command-line entry point: ``snedge <command> [options]``.

Settings come from built-in defaults, then an optional flat YAML config
file (``--config``), then command-line flags. Primary outputs go to
``--output``; without it they go to ``$SNEDGE_OUTPUT_DIR/<command>-<law>.<ext>``
when that variable is set, and to stdout otherwise.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import distributions as dist
from .check import run_checks
from .entropy_coeffs import MAX_L, c_l_detail
from .expansion import MAX_M, MIN_M, edgeworth_cdf, edgeworth_pdf
from .lambda_moments import TERMS, expected_lambda_terms, mc_lambda_mean
from .metrics import (
    RATE_CSV_COLUMNS,
    RateFitError,
    l1_distance,
    rate_fit,
    relative_entropy,
    weighted_sup_error,
)
from .simulate import (
    DEFAULT_BLOCK,
    SimulationState,
    default_grid,
    gaussian_exact_density,
    run_simulation,
)
from .special_math import normal_cdf, normal_pdf

OUTPUT_ENV = "SNEDGE_OUTPUT_DIR"
METRICS = ("cdf-sup", "density-sup", "tv", "entropy")
MIN_MC_REPS = 1000
EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    law: str = "gaussian"
    m: int = 4
    n: list[int] = field(default_factory=lambda: [64])
    reps: int = 100_000
    seed: int = 0
    metric: str = "cdf-sup"
    grid: Optional[str] = None
    output: Optional[str] = None
    oracle: bool = False
    threads: int = 1
    block_size: int = DEFAULT_BLOCK
    svg: Optional[str] = None
    snapshot: Optional[str] = None
    resume: Optional[str] = None
    max_blocks: Optional[int] = None
    lmax: int = 2
    mu4: Optional[float] = None
    mu6: Optional[float] = None
    mu8: Optional[float] = None

    def grid_points(self, n: int) -> np.ndarray:
        if self.grid is None:
            return default_grid(n)
        try:
            lo, hi, step = (float(p) for p in self.grid.split(":"))
        except ValueError:
            raise UsageError(f"grid must look like lo:hi:step, got {self.grid!r}") from None
        if not (hi > lo and step > 0):
            raise UsageError("grid needs lo < hi and step > 0")
        k0, k1 = math.ceil(lo / step - 1e-9), math.floor(hi / step + 1e-9)
        return np.arange(k0, k1 + 1) * step


_KEYS = {f.name for f in fields(RunConfig)}


def _parse_n(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        items = value
    elif isinstance(value, int):
        items = [value]
    else:
        items = [p for p in str(value).replace(",", " ").split() if p]
    try:
        return [int(p) for p in items]
    except (TypeError, ValueError):
        raise UsageError(f"n must be a list of integers, got {value!r}") from None


def load_config_file(path: str) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must be a flat key-value mapping")
    out = {}
    for key, value in data.items():
        key = str(key).replace("-", "_")
        if key not in _KEYS:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(value, (dict, list)) and key != "n":
            raise UsageError(f"config key {key!r} must be a scalar")
        out[key] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in _KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "n" in values:
        values["n"] = _parse_n(values["n"])
    try:
        cfg = RunConfig(**values)
        for name in ("m", "reps", "seed", "threads", "block_size", "lmax"):
            setattr(cfg, name, int(getattr(cfg, name)))
        for name in ("mu4", "mu6", "mu8"):
            v = getattr(cfg, name)
            if v is not None:
                setattr(cfg, name, float(v))
        cfg.oracle = bool(cfg.oracle)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config value: {exc}") from None
    return cfg


def validate(cfg: RunConfig, *, mc: bool) -> None:
    if not MIN_M <= cfg.m <= MAX_M:
        raise UsageError(f"m must be in {MIN_M}..{MAX_M}, got {cfg.m}")
    if not cfg.n:
        raise UsageError("n list is empty")
    if len(set(cfg.n)) != len(cfg.n) or min(cfg.n) < 2:
        raise UsageError("n values must be distinct and >= 2")
    if mc and cfg.reps < MIN_MC_REPS:
        raise UsageError(f"replications must be >= {MIN_MC_REPS} for Monte Carlo runs")
    if cfg.threads < 1 or cfg.block_size < 1:
        raise UsageError("threads and block_size must be positive")


def resolve_law(cfg: RunConfig) -> dist.SymmetricLaw:
    if cfg.law == "custom":
        moments = {k: v for k, v in ((4, cfg.mu4), (6, cfg.mu6), (8, cfg.mu8)) if v is not None}
        if 4 not in moments:
            raise UsageError("a custom law needs at least mu4")
        try:
            return dist.custom_law("custom", moments)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        return dist.get_law(cfg.law)
    except KeyError as exc:
        raise UsageError(f"{exc.args[0]} (or 'custom' with mu4/mu6 keys)") from None


def moments_header(law: dist.SymmetricLaw) -> str:
    parts = [f"mu{k}={fmt(law.moments[k])}" for k in (4, 6, 8) if not math.isnan(law.moments[k])]
    return " ".join(parts)


# ---------------------------------------------------------------------------
# output


def write_output(cfg: RunConfig, command: str, ext: str, text: str) -> None:
    path = cfg.output
    if path is None and os.environ.get(OUTPUT_ENV):
        path = os.path.join(os.environ[OUTPUT_ENV], f"{command}-{cfg.law}.{ext}")
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_text(comments: Sequence[str], header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def svg_loglog(pairs, slope: float, intercept: float, title: str) -> str:
    """Static line chart of log10(error) against log10(n) with the fitted line."""
    lx = [math.log10(n) for n, _ in pairs]
    ly = [math.log10(e) for _, e in pairs]
    fit = [(slope * math.log(10 ** x) + intercept) / math.log(10) for x in lx]
    xmin, xmax = min(lx), max(lx)
    ymin, ymax = min(ly + fit), max(ly + fit)
    xpad = 0.05 * (xmax - xmin or 1)
    ypad = 0.05 * (ymax - ymin or 1)
    W, H, L, B = 480, 360, 60, 40

    def px(x):
        return L + (x - xmin + xpad) / (xmax - xmin + 2 * xpad) * (W - L - 20)

    def py(y):
        return H - B - (y - ymin + ypad) / (ymax - ymin + 2 * ypad) * (H - B - 30)

    data = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(lx, ly))
    line = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(lx, fit))
    dots = "".join(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="black"/>' for x, y in zip(lx, ly))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">\n'
        f'<rect width="{W}" height="{H}" fill="white"/>\n'
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>\n'
        f'<line x1="{L}" y1="{H - B}" x2="{W - 20}" y2="{H - B}" stroke="black"/>\n'
        f'<line x1="{L}" y1="{H - B}" x2="{L}" y2="30" stroke="black"/>\n'
        f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="12">log10(n)</text>\n'
        f'<text x="14" y="{H / 2}" font-size="12" transform="rotate(-90 14 {H / 2})">log10(error)</text>\n'
        f'<polyline points="{data}" fill="none" stroke="black"/>\n{dots}\n'
        f'<polyline points="{line}" fill="none" stroke="red" stroke-dasharray="5,3"/>\n'
        f'<text x="{W - 25}" y="44" text-anchor="end" font-size="12" fill="red">slope {slope:.3f}</text>\n'
        "</svg>\n"
    )


# ---------------------------------------------------------------------------
# commands


def cmd_expand(cfg: RunConfig) -> int:
    validate(cfg, mc=False)
    law = resolve_law(cfg)
    n = cfg.n[0]
    x = cfg.grid_points(n)
    F = edgeworth_cdf(cfg.m, n, law)
    f = edgeworth_pdf(cfg.m, n, law)
    rows = zip(x, F(x), f(x), normal_cdf(x), normal_pdf(x))
    text = csv_text(
        [f"m={cfg.m} n={n} law={law.id} {moments_header(law)}"],
        ("x", "Phi_Q", "phi_q", "Phi", "phi"),
        rows,
    )
    write_output(cfg, "expand", "csv", text)
    return EXIT_OK


def _oracle_value(cfg: RunConfig, law, n: int) -> tuple[float, float]:
    exact = gaussian_exact_density(n)
    x = cfg.grid_points(n)
    root = math.sqrt(n)
    if cfg.metric == "cdf-sup":
        return weighted_sup_error(edgeworth_cdf(cfg.m, n, law), exact.cdf, cfg.m, x), 0.0
    if cfg.metric == "density-sup":
        return weighted_sup_error(edgeworth_pdf(cfg.m, n, law), exact, cfg.m, x), 0.0
    if cfg.metric == "tv":
        return l1_distance(exact, edgeworth_pdf(cfg.m, n, law), breakpoints=(-root, root)), 0.0
    r = min(root, 12.0)
    return relative_entropy(exact, (-r, r), logp=exact.logpdf), 0.0


def _mc_value(cfg: RunConfig, law, n: int, seed: int) -> tuple[float, float]:
    state = run_simulation(
        law, n, cfg.reps, seed, grid=cfg.grid_points(n), threads=cfg.threads, block_size=cfg.block_size
    )
    if cfg.metric == "cdf-sup":
        x = state.ecdf.grid
        w = (1.0 + np.abs(x)) ** cfg.m
        diff = w * np.abs(state.ecdf.eval() - edgeworth_cdf(cfg.m, n, law)(x))
        i = int(np.argmax(diff))
        return float(diff[i]), float(w[i] * state.ecdf.standard_error()[i])
    h = state.hist
    F = edgeworth_cdf(cfg.m, n, law)
    width = np.diff(h.edges)
    approx_mass = np.diff(F(h.edges))
    p = h.masses
    se_mass = np.sqrt(p * (1.0 - p) / h.total)
    if cfg.metric == "density-sup":
        w = (1.0 + np.abs(h.centers)) ** cfg.m
        diff = w * np.abs(p - approx_mass) / width
        i = int(np.argmax(diff))
        return float(diff[i]), float(w[i] * se_mass[i] / width[i])
    # tv: binned L1 plus the mass outside the histogram range
    outside = abs(h.outside_mass - (1.0 - float(F(h.edges[-1]) - F(h.edges[0]))))
    return float(np.abs(p - approx_mass).sum() + outside), float(math.sqrt((se_mass**2).sum()))


def cmd_rates(cfg: RunConfig) -> int:
    if cfg.metric not in METRICS:
        raise UsageError(f"metric must be one of {', '.join(METRICS)}")
    validate(cfg, mc=not cfg.oracle)
    if len(cfg.n) < 3:
        raise UsageError("rates need at least three n values")
    law = resolve_law(cfg)
    if cfg.oracle and law.id != "gaussian":
        raise UsageError("the exact oracle exists only for the gaussian law")
    if not cfg.oracle:
        if cfg.metric == "entropy":
            raise UsageError("the entropy metric needs the exact oracle (--oracle)")
        if law.draw is None:
            raise UsageError(f"law {law.id!r} has no sampler")
    rows, pairs = [], []
    for i, n in enumerate(cfg.n):
        value, se = _oracle_value(cfg, law, n) if cfg.oracle else _mc_value(cfg, law, n, cfg.seed + i)
        rows.append((n, cfg.metric, cfg.m, law.id, value, se))
        pairs.append((n, value))
    try:
        rep = rate_fit(pairs)
    except RateFitError as exc:
        raise UsageError(str(exc)) from None
    rows.append(("slope", cfg.metric, cfg.m, law.id, rep.slope, math.nan))
    reference = "exact gaussian oracle" if cfg.oracle else ("ECDF" if cfg.metric == "cdf-sup" else "histogram")
    comments = [f"m={cfg.m} law={law.id} {moments_header(law)} reference={reference}"]
    if not cfg.oracle:
        comments.append(f"reps={cfg.reps} seed={cfg.seed} (seed + i for the i-th n)")
    if cfg.metric == "tv":
        comments.append("tv is reported as the L1 distance of densities (TV-equivalent)")
    comments.append(f"slope row: least-squares log-log fit, r_squared={fmt(rep.r_squared)}")
    write_output(cfg, "rates", "csv", csv_text(comments, RATE_CSV_COLUMNS, rows))
    if cfg.svg:
        Path(cfg.svg).write_text(
            svg_loglog(pairs, rep.slope, rep.intercept, f"{cfg.metric} m={cfg.m} {law.id}"), encoding="utf-8"
        )
    return EXIT_OK


SUMMARY_POINTS = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)


def _load_snapshots(path: str) -> dict[int, SimulationState]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return {s.n: s for s in (SimulationState.from_json(t) for t in payload["states"])}
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read snapshot {path}: {exc}") from None


def cmd_simulate(cfg: RunConfig) -> int:
    validate(cfg, mc=True)
    law = resolve_law(cfg)
    if law.draw is None:
        raise UsageError(f"law {law.id!r} has no sampler")
    resumed = _load_snapshots(cfg.resume) if cfg.resume else {}
    states = []
    for i, n in enumerate(cfg.n):
        seed = cfg.seed + i
        prior = resumed.get(n)
        try:
            state = run_simulation(
                law, n, cfg.reps, seed, grid=cfg.grid_points(n), threads=cfg.threads,
                block_size=cfg.block_size, resume=prior, max_blocks=cfg.max_blocks,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        states.append(state)
    if cfg.snapshot:
        Path(cfg.snapshot).write_text(
            json.dumps({"states": [s.to_json() for s in states]}, sort_keys=True) + "\n", encoding="utf-8"
        )
    rows = []
    for s in states:
        mom = s.moments
        rows += [
            (s.n, "count", mom.count, 0.0),
            (s.n, "mean", mom.mean, mom.standard_error),
            (s.n, "variance", mom.variance, math.nan),
            (s.n, "max_abs", mom.max_abs, math.nan),
            (s.n, "hist_outside", s.hist.outside_mass, math.nan),
        ]
        F, se = s.ecdf.eval(), s.ecdf.standard_error()
        approx = edgeworth_cdf(cfg.m, s.n, law)(s.ecdf.grid)
        for x in SUMMARY_POINTS:
            j = int(np.argmin(np.abs(s.ecdf.grid - x)))
            if abs(s.ecdf.grid[j] - x) < 1e-9:
                rows.append((s.n, f"ecdf({fmt(x)})", F[j], se[j]))
        w = (1.0 + np.abs(s.ecdf.grid)) ** cfg.m
        diff = w * np.abs(F - approx)
        j = int(np.argmax(diff))
        rows.append((s.n, "weighted_sup_vs_expansion", diff[j], w[j] * se[j]))
    comments = [
        f"law={law.id} {moments_header(law)} m={cfg.m} reps={cfg.reps} seed={cfg.seed} block_size={cfg.block_size}",
        "seed for the i-th n value is seed + i",
        "complete=" + ",".join(f"{s.n}:{int(s.complete)}" for s in states),
    ]
    write_output(cfg, "simulate", "csv", csv_text(comments, ("n", "statistic", "value", "stderr"), rows))
    return EXIT_OK


def cmd_entropy(cfg: RunConfig) -> int:
    law = resolve_law(cfg)
    if not 1 <= cfg.lmax <= MAX_L:
        raise UsageError(f"lmax must be in 1..{MAX_L}")
    out: dict = {"law": law.id}
    partial = {}
    try:
        for l in range(1, cfg.lmax + 1):
            value, part = c_l_detail(law, l)
            out[f"c{l}"] = value
            partial[f"c{l}"] = part
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out["partial"] = partial
    write_output(cfg, "entropy-coeffs", "json", json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_lambda(cfg: RunConfig) -> int:
    validate(cfg, mc=True)
    law = resolve_law(cfg)
    if law.draw is None:
        raise UsageError(f"law {law.id!r} has no sampler")
    closed = expected_lambda_terms(law.mu4, law.mu6, law.mu8)
    rows = []
    for i, n in enumerate(cfg.n):
        for term in TERMS:
            est, se = mc_lambda_mean(law, n, term, cfg.reps, cfg.seed + i, cfg.block_size)
            rows.append((n, term, est, se, closed[term](n)))
    comments = [
        f"law={law.id} {moments_header(law)} reps={cfg.reps} seed={cfg.seed}",
        "terms: lambda4 = l4/4!, lambda6 = l6/6!, lambda4_sq = (l4/4!)^2/2; closed_form is the two-term expansion",
    ]
    write_output(cfg, "lambda", "csv", csv_text(comments, ("n", "term", "estimate", "se", "closed_form"), rows))
    return EXIT_OK


def cmd_check(cfg: Optional[RunConfig] = None) -> int:
    return EXIT_OK if run_checks(print) else EXIT_INVARIANT


COMMANDS = {
    "expand": cmd_expand,
    "simulate": cmd_simulate,
    "rates": cmd_rates,
    "entropy-coeffs": cmd_entropy,
    "lambda": cmd_lambda,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML file of key: value settings")
    common.add_argument("--law", help="gaussian, uniform, laplace, gauss_mix or custom")
    common.add_argument("--m", type=int, help="expansion order (2..6)")
    common.add_argument("--n", help="comma-separated sample sizes")
    common.add_argument("--reps", type=int, help="Monte Carlo replications per n")
    common.add_argument("--seed", type=int)
    common.add_argument("--grid", help="lo:hi:step evaluation grid")
    common.add_argument("--output", "-o", help="output file (default: stdout or $%s)" % OUTPUT_ENV)
    common.add_argument("--threads", type=int, help="worker cap for Monte Carlo blocks")
    common.add_argument("--block-size", dest="block_size", type=int)
    common.add_argument("--mu4", type=float)
    common.add_argument("--mu6", type=float)
    common.add_argument("--mu8", type=float)

    parser = argparse.ArgumentParser(prog="snedge", description="Edgeworth expansions for self-normalized sums")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("expand", parents=[common], help="tabulate the expansion over a grid")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimator summaries")
    p.add_argument("--snapshot", help="write estimator state JSON here")
    p.add_argument("--resume", help="continue from a snapshot")
    p.add_argument("--max-blocks", dest="max_blocks", type=int, help="stop after this many new blocks")
    p = sub.add_parser("rates", parents=[common], help="error against n with a log-log slope")
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--oracle", action="store_true", default=None, help="use the exact gaussian density")
    p.add_argument("--svg", help="also write a log-log SVG plot")
    p = sub.add_parser("entropy-coeffs", parents=[common], help="entropy expansion coefficients as JSON")
    p.add_argument("--lmax", type=int)
    sub.add_parser("lambda", parents=[common], help="Monte Carlo means of the lambda terms")
    sub.add_parser("check", help="run the invariant suite")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check()
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"snedge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
