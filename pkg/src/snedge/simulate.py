"""Monte Carlo sampling of T_n, mergeable estimators, and the exact Gaussian-input density."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy import special

from .distributions import SymmetricLaw, get_law, sample_matrix

DEFAULT_BLOCK = 16_384
SNAPSHOT_VERSION = 1
# Relative slack on |T_n| <= sqrt(n); the bound is exact, floating point is not.
BOUND_SLACK = 1e-12


class MergeError(ValueError):
    pass


class BoundViolation(AssertionError):
    pass


def default_grid(n: Optional[int] = None, step: float = 0.01) -> np.ndarray:
    """Evaluation grid: [-8, 8], widened to cover [-sqrt(n)-1, sqrt(n)+1] when n < 64."""
    half = 8.0
    if n is not None and n < 64:
        half = max(half, math.sqrt(n) + 1.0)
    k = int(round(half / step))
    return np.arange(-k, k + 1) * step


def block_plan(replications: int, block_size: int = DEFAULT_BLOCK) -> list[tuple[int, int]]:
    """Split ``replications`` into ``(block_index, rows)`` pairs; the plan fixes the random streams."""
    if replications < 1:
        raise ValueError("replications must be positive")
    full, rest = divmod(replications, block_size)
    plan = [(i, block_size) for i in range(full)]
    if rest:
        plan.append((full, rest))
    return plan


def tn_from_draws(x: np.ndarray) -> np.ndarray:
    """Row-wise ``S/V`` with the convention ``T = 0`` when every entry is zero."""
    S = x.sum(axis=1)
    V = np.sqrt(np.einsum("ij,ij->i", x, x))
    return np.where(V > 0, S / np.where(V > 0, V, 1.0), 0.0)


def check_bound(values: np.ndarray, n: int) -> None:
    limit = math.sqrt(n) * (1.0 + BOUND_SLACK)
    worst = float(np.max(np.abs(values))) if values.size else 0.0
    if worst > limit:
        raise BoundViolation(f"|T_n| = {worst!r} exceeds sqrt(n) = {math.sqrt(n)!r}")


@dataclass(frozen=True)
class TnSampleBatch:
    law_id: str
    n: int
    values: np.ndarray
    seed: int
    stream: tuple[int, int]


def sample_block(law: SymmetricLaw, n: int, rows: int, seed: int, block: int) -> np.ndarray:
    x = sample_matrix(law, (rows, n), seed, (n, block))
    t = tn_from_draws(x)
    check_bound(t, n)
    return t


def sample_Tn(
    law: SymmetricLaw, n: int, replications: int, seed: int, block_size: int = DEFAULT_BLOCK
) -> Iterator[TnSampleBatch]:
    """Yield batches of ``T_n`` draws; block ``b`` uses random stream ``(n, b)`` of ``seed``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    for block, rows in block_plan(replications, block_size):
        yield TnSampleBatch(law.id, n, sample_block(law, n, rows, seed, block), seed, (n, block))


# ---------------------------------------------------------------------------
# Mergeable estimators


@dataclass
class EcdfGrid:
    """Counts of values ``<= grid[i]``; mergeable by addition."""

    grid: np.ndarray
    counts: np.ndarray = None
    total: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        if self.counts is None:
            self.counts = np.zeros(self.grid.size, dtype=np.int64)

    def update(self, values: np.ndarray) -> "EcdfGrid":
        v = np.sort(np.asarray(values, dtype=float))
        self.counts += np.searchsorted(v, self.grid, side="right")
        self.total += v.size
        return self

    def merge(self, other: "EcdfGrid") -> "EcdfGrid":
        if self.grid.shape != other.grid.shape or not np.array_equal(self.grid, other.grid):
            raise MergeError("ECDF grids differ")
        return EcdfGrid(self.grid.copy(), self.counts + other.counts, self.total + other.total)

    def eval(self) -> np.ndarray:
        if self.total == 0:
            raise ValueError("empty ECDF")
        return self.counts / self.total

    def standard_error(self) -> np.ndarray:
        F = self.eval()
        return np.sqrt(F * (1.0 - F) / self.total)


@dataclass
class HistogramDensity:
    """Fixed-edge histogram; values outside the edges are counted as ``outside``."""

    edges: np.ndarray
    counts: np.ndarray = None
    outside: int = 0
    total: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.edges.size < 2 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly ascending with at least one bin")
        if self.counts is None:
            self.counts = np.zeros(self.edges.size - 1, dtype=np.int64)

    @classmethod
    def for_replications(cls, replications: int, lo: float = -6.0, hi: float = 6.0) -> "HistogramDensity":
        bins = min(400, math.ceil(2.0 * replications ** (1.0 / 3.0)))
        return cls(np.linspace(lo, hi, bins + 1))

    def update(self, values: np.ndarray) -> "HistogramDensity":
        v = np.asarray(values, dtype=float)
        inside = (v >= self.edges[0]) & (v <= self.edges[-1])
        self.counts += np.histogram(v[inside], bins=self.edges)[0]
        self.outside += int(v.size - inside.sum())
        self.total += v.size
        return self

    def merge(self, other: "HistogramDensity") -> "HistogramDensity":
        if self.edges.shape != other.edges.shape or not np.array_equal(self.edges, other.edges):
            raise MergeError("histogram edges differ")
        return HistogramDensity(
            self.edges.copy(),
            self.counts + other.counts,
            self.outside + other.outside,
            self.total + other.total,
        )

    @property
    def masses(self) -> np.ndarray:
        return self.counts / self.total

    @property
    def outside_mass(self) -> float:
        return self.outside / self.total

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def density(self) -> np.ndarray:
        return self.masses / np.diff(self.edges)

    def density_eval(self, x) -> np.ndarray:
        """Histogram density at ``x`` (0 outside the edges)."""
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.counts.size - 1)
        inside = (x >= self.edges[0]) & (x <= self.edges[-1])
        return np.where(inside, self.density()[idx], 0.0)


@dataclass
class MomentAccumulator:
    """Count, mean and centred second moment, merged with Chan's update."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    max_abs: float = 0.0

    @classmethod
    def from_values(cls, values: np.ndarray) -> "MomentAccumulator":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return cls()
        mean = float(v.mean())
        return cls(v.size, mean, float(((v - mean) ** 2).sum()), float(np.abs(v).max()))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.count == 0:
            return MomentAccumulator(self.count, self.mean, self.m2, self.max_abs)
        if self.count == 0:
            return MomentAccumulator(other.count, other.mean, other.m2, other.max_abs)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return MomentAccumulator(n, mean, m2, max(self.max_abs, other.max_abs))

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan


@dataclass
class SimulationState:
    """All estimators for one ``(law, n, seed)`` run; ``blocks_done`` counts merged blocks."""

    law_id: str
    n: int
    seed: int
    replications: int
    block_size: int
    ecdf: EcdfGrid
    hist: HistogramDensity
    moments: MomentAccumulator = field(default_factory=MomentAccumulator)
    blocks_done: int = 0

    @classmethod
    def empty(
        cls,
        law_id: str,
        n: int,
        seed: int,
        replications: int,
        grid: Optional[np.ndarray] = None,
        edges: Optional[np.ndarray] = None,
        block_size: int = DEFAULT_BLOCK,
    ) -> "SimulationState":
        grid = default_grid(n) if grid is None else np.asarray(grid, dtype=float)
        hist = (
            HistogramDensity.for_replications(replications)
            if edges is None
            else HistogramDensity(np.asarray(edges, dtype=float))
        )
        return cls(law_id, n, seed, replications, block_size, EcdfGrid(grid), hist)

    def fresh_like(self) -> "SimulationState":
        return SimulationState(
            self.law_id, self.n, self.seed, self.replications, self.block_size,
            EcdfGrid(self.ecdf.grid.copy()), HistogramDensity(self.hist.edges.copy()),
        )

    def absorb(self, values: np.ndarray) -> "SimulationState":
        self.ecdf.update(values)
        self.hist.update(values)
        self.moments = self.moments.merge(MomentAccumulator.from_values(values))
        self.blocks_done += 1
        return self

    def merge(self, other: "SimulationState") -> "SimulationState":
        if (self.law_id, self.n, self.seed) != (other.law_id, other.n, other.seed):
            raise MergeError("states come from different runs")
        return SimulationState(
            self.law_id, self.n, self.seed, self.replications, self.block_size,
            self.ecdf.merge(other.ecdf), self.hist.merge(other.hist),
            self.moments.merge(other.moments), self.blocks_done + other.blocks_done,
        )

    @property
    def complete(self) -> bool:
        return self.blocks_done >= len(block_plan(self.replications, self.block_size))

    def to_json(self) -> str:
        payload = {
            "version": SNAPSHOT_VERSION,
            "law": self.law_id,
            "n": self.n,
            "seed": self.seed,
            "replications": self.replications,
            "block_size": self.block_size,
            "blocks_done": self.blocks_done,
            "ecdf": {"grid": self.ecdf.grid.tolist(), "counts": self.ecdf.counts.tolist(), "total": self.ecdf.total},
            "hist": {
                "edges": self.hist.edges.tolist(),
                "counts": self.hist.counts.tolist(),
                "outside": self.hist.outside,
                "total": self.hist.total,
            },
            "moments": {
                "count": self.moments.count,
                "mean": self.moments.mean,
                "m2": self.moments.m2,
                "max_abs": self.moments.max_abs,
            },
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimulationState":
        d = json.loads(text)
        if d.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {d.get('version')!r}")
        e, h, m = d["ecdf"], d["hist"], d["moments"]
        return cls(
            d["law"], d["n"], d["seed"], d["replications"], d["block_size"],
            EcdfGrid(np.array(e["grid"]), np.array(e["counts"], dtype=np.int64), e["total"]),
            HistogramDensity(np.array(h["edges"]), np.array(h["counts"], dtype=np.int64), h["outside"], h["total"]),
            MomentAccumulator(m["count"], m["mean"], m["m2"], m["max_abs"]),
            d["blocks_done"],
        )


def run_simulation(
    law: SymmetricLaw,
    n: int,
    replications: int,
    seed: int,
    *,
    grid: Optional[np.ndarray] = None,
    edges: Optional[np.ndarray] = None,
    threads: int = 1,
    block_size: int = DEFAULT_BLOCK,
    resume: Optional[SimulationState] = None,
    max_blocks: Optional[int] = None,
) -> SimulationState:
    """Simulate ``replications`` draws of ``T_n`` and return the merged estimator state.

    Blocks are computed on up to ``threads`` workers, each into its own
    state, and folded in block order. Integer counts are therefore identical
    for every thread count, and so is the floating-point moment state.
    """
    state = resume or SimulationState.empty(law.id, n, seed, replications, grid, edges, block_size)
    if resume is not None and (resume.law_id, resume.n, resume.seed) != (law.id, n, seed):
        raise MergeError("snapshot does not match the requested run")
    plan = block_plan(replications, state.block_size)[state.blocks_done :]
    if max_blocks is not None:
        plan = plan[:max_blocks]

    def work(item):
        block, rows = item
        return state.fresh_like().absorb(sample_block(law, n, rows, seed, block))

    if threads <= 1:
        for part in map(work, plan):
            state = state.merge(part)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(work, plan):
                state = state.merge(part)
    return state


def simulate_law(law_id: str, n: int, replications: int, seed: int, **kwargs) -> SimulationState:
    return run_simulation(get_law(law_id), n, replications, seed, **kwargs)


# ---------------------------------------------------------------------------
# Exact density for Gaussian inputs


class GaussianTnDensity:
    """Density of ``T_n`` for standard normal inputs.

    ``T_n / sqrt(n)`` is one coordinate of a uniform point on the unit sphere
    in ``R^n``, so ``f_n(t) = C_n (1 - t^2/n)^{(n-3)/2}`` on ``|t| < sqrt(n)``
    with ``C_n = Gamma(n/2) / (Gamma((n-1)/2) sqrt(n pi))``.
    """

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("exact density needs n >= 2")
        self.n = n
        self.support = math.sqrt(n)
        self.log_const = (
            special.gammaln(n / 2.0) - special.gammaln((n - 1) / 2.0) - 0.5 * math.log(n * math.pi)
        )

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        u = t * t / self.n
        with np.errstate(divide="ignore", invalid="ignore"):
            inside = self.log_const + 0.5 * (self.n - 3) * np.log1p(-np.minimum(u, 1.0))
        out = np.where(u < 1.0, inside, -np.inf)
        return out if out.ndim else float(out)

    def __call__(self, t):
        out = np.exp(self.logpdf(t))
        return out if np.ndim(out) else float(out)

    def cdf(self, t):
        # T^2/n ~ Beta(1/2, (n-1)/2), symmetric about 0.
        t = np.asarray(t, dtype=float)
        u = np.minimum(t * t / self.n, 1.0)
        half = 0.5 * special.betainc(0.5, 0.5 * (self.n - 1), u)
        out = 0.5 + np.sign(t) * half
        return out if out.ndim else float(out)


def gaussian_exact_density(n: int) -> GaussianTnDensity:
    return GaussianTnDensity(n)


__all__ = [
    "DEFAULT_BLOCK",
    "BoundViolation",
    "EcdfGrid",
    "GaussianTnDensity",
    "HistogramDensity",
    "MergeError",
    "MomentAccumulator",
    "SimulationState",
    "TnSampleBatch",
    "block_plan",
    "check_bound",
    "default_grid",
    "gaussian_exact_density",
    "run_simulation",
    "sample_Tn",
    "simulate_law",
    "tn_from_draws",
]

