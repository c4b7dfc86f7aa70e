"""Unit-variance symmetric source laws, moment/cumulant conversion and two-point cumulants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .special_math import normal_pdf

MOMENT_ORDER = 12
SUPPORTED_CONDITIONAL_ORDERS = (2, 4, 6)


class UnsupportedOrderError(ValueError):
    pass


class ArityError(ValueError):
    pass


def rng_for(seed: int, stream: int | tuple[int, ...] = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``.

    Philox streams seeded through ``SeedSequence(seed, spawn_key=stream)``
    are statistically independent, so work split into streams is
    reproducible no matter how streams are later grouped across workers.
    ``stream`` may be an int or a tuple of ints (e.g. ``(n, block)``).
    """
    key = (stream,) if isinstance(stream, (int, np.integer)) else tuple(stream)
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


Sampler = Callable[[np.random.Generator, tuple], np.ndarray]


@dataclass(frozen=True)
class SymmetricLaw:
    """A symmetric source distribution with ``E X = 0`` and ``Var X = 1``.

    ``moments[k]`` is ``E X^k`` for ``k = 0..12``. Laws given only through
    moments have no sampler or density.
    """

    id: str
    moments: tuple[float, ...]
    density: Optional[Callable] = field(default=None, compare=False)
    cdf: Optional[Callable] = field(default=None, compare=False)
    draw: Optional[Sampler] = field(default=None, compare=False, repr=False)
    non_singular: bool = True

    def __post_init__(self):
        mu = self.moments
        if len(mu) != MOMENT_ORDER + 1:
            raise ArityError(f"expected moments mu_0..mu_{MOMENT_ORDER}, got {len(mu)}")
        if mu[0] != 1 or mu[2] != 1:
            raise ValueError(f"law {self.id!r}: need mu_0 = 1 and mu_2 = 1 (unit variance)")
        if any(mu[k] != 0 for k in range(1, MOMENT_ORDER + 1, 2)):
            raise ValueError(f"law {self.id!r}: odd moments must vanish (symmetry)")
        # Cauchy-Schwarz on X^2 and X^{2k}: mu_{2k-2}^2 <= mu_{2k-4} mu_{2k}.
        for k in range(2, MOMENT_ORDER // 2 + 1):
            if mu[2 * k - 2] ** 2 > mu[2 * k - 4] * mu[2 * k] * (1 + 1e-12):
                raise ValueError(f"law {self.id!r}: moments violate Cauchy-Schwarz at order {2 * k}")

    @property
    def has_density(self) -> bool:
        return self.density is not None

    @property
    def mu4(self) -> float:
        return self.moments[4]

    @property
    def mu6(self) -> float:
        return self.moments[6]

    @property
    def mu8(self) -> float:
        return self.moments[8]


def _even_moments(even: Callable[[int], float]) -> tuple[float, ...]:
    return tuple(float(even(k // 2)) if k % 2 == 0 else 0.0 for k in range(MOMENT_ORDER + 1))


def _double_factorial_odd(k: int) -> int:
    # (2k-1)!!
    return math.prod(range(1, 2 * k, 2))


def gaussian_law() -> SymmetricLaw:
    from scipy.special import ndtr

    return SymmetricLaw(
        id="gaussian",
        moments=_even_moments(_double_factorial_odd),
        density=normal_pdf,
        cdf=ndtr,
        draw=lambda rng, shape: rng.standard_normal(shape),
    )


def uniform_law() -> SymmetricLaw:
    a = math.sqrt(3.0)

    def density(x):
        return np.where(np.abs(x) <= a, 0.5 / a, 0.0)

    return SymmetricLaw(
        id="uniform",
        moments=_even_moments(lambda k: 3.0**k / (2 * k + 1)),
        density=density,
        cdf=lambda x: np.clip((np.asarray(x) + a) / (2 * a), 0.0, 1.0),
        draw=lambda rng, shape: rng.uniform(-a, a, shape),
    )


def laplace_law() -> SymmetricLaw:
    b = 1.0 / math.sqrt(2.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.5 * np.exp(x / b), 1.0 - 0.5 * np.exp(-x / b))

    return SymmetricLaw(
        id="laplace",
        moments=_even_moments(lambda k: math.factorial(2 * k) / 2**k),
        density=lambda x: np.exp(-np.abs(x) / b) / (2 * b),
        cdf=cdf,
        draw=lambda rng, shape: rng.laplace(0.0, b, shape),
    )


def gauss_mix_law(var1: float = 0.5) -> SymmetricLaw:
    """Equal mixture of N(0, var1) and N(0, 2 - var1)."""
    if not 0 < var1 < 2:
        raise ValueError("var1 must lie in (0, 2)")
    var2 = 2.0 - var1
    s1, s2 = math.sqrt(var1), math.sqrt(var2)

    def density(x):
        return 0.5 * (normal_pdf(np.asarray(x) / s1) / s1 + normal_pdf(np.asarray(x) / s2) / s2)

    def cdf(x):
        from scipy.special import ndtr

        return 0.5 * (ndtr(np.asarray(x) / s1) + ndtr(np.asarray(x) / s2))

    def draw(rng, shape):
        pick = rng.random(shape) < 0.5
        z = rng.standard_normal(shape)
        return z * np.where(pick, s1, s2)

    return SymmetricLaw(
        id="gauss_mix",
        moments=_even_moments(
            lambda k: _double_factorial_odd(k) * 0.5 * (var1**k + var2**k)
        ),
        density=density,
        cdf=cdf,
        draw=draw,
    )


@lru_cache(maxsize=1)
def _catalog() -> dict[str, SymmetricLaw]:
    laws = [gaussian_law(), uniform_law(), laplace_law(), gauss_mix_law()]
    return {law.id: law for law in laws}


def catalog() -> Mapping[str, SymmetricLaw]:
    """Built-in laws keyed by id."""
    return dict(_catalog())


def get_law(law_id: str) -> SymmetricLaw:
    laws = _catalog()
    if law_id not in laws:
        raise KeyError(f"unknown law {law_id!r}; valid ids: {', '.join(sorted(laws))}")
    return laws[law_id]


def custom_law(law_id: str, even_moments: Mapping[int, float]) -> SymmetricLaw:
    """Law known only through its even moments ``{4: mu_4, 6: mu_6, ...}``.

    Missing orders are filled with ``nan``; no density or sampler is attached.
    """
    mu = [math.nan] * (MOMENT_ORDER + 1)
    mu[0], mu[2] = 1.0, 1.0
    for k in range(1, MOMENT_ORDER + 1, 2):
        mu[k] = 0.0
    for k, v in even_moments.items():
        k = int(k)
        if k % 2 or not 4 <= k <= MOMENT_ORDER:
            raise ValueError(f"custom moments must be even orders 4..{MOMENT_ORDER}, got {k}")
        mu[k] = float(v)
    return SymmetricLaw(id=law_id, moments=tuple(mu), non_singular=True)


def sample(law: SymmetricLaw, n: int, seed: int, stream: int | tuple[int, ...] = 0) -> np.ndarray:
    """Draw ``n`` values from ``law``; deterministic in ``(law, n, seed, stream)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return sample_matrix(law, (n,), seed, stream)


def sample_matrix(law: SymmetricLaw, shape: tuple, seed: int, stream: int | tuple[int, ...] = 0) -> np.ndarray:
    if law.draw is None:
        raise ValueError(f"law {law.id!r} has no sampler (defined by moments only)")
    return law.draw(rng_for(seed, stream), tuple(shape))


def moments_to_cumulants(moments: Sequence[float]) -> np.ndarray:
    """Cumulants ``kappa_1..kappa_L`` from raw moments ``mu_0..mu_L``.

    Returned array is indexed like the input, ``out[l] = kappa_l`` with
    ``out[0] = 0``. Uses ``kappa_l = mu_l - sum_{k<l} C(l-1, k-1) kappa_k mu_{l-k}``.
    """
    mu = np.asarray(moments, dtype=float)
    if mu.size < 2:
        raise ArityError("need at least mu_0 and mu_1")
    if mu[0] != 1:
        raise ValueError("mu_0 must equal 1")
    kappa = np.zeros_like(mu)
    for l in range(1, mu.size):
        kappa[l] = mu[l] - sum(math.comb(l - 1, k - 1) * kappa[k] * mu[l - k] for k in range(1, l))
    return kappa


def cumulants_to_moments(cumulants: Sequence[float]) -> np.ndarray:
    """Inverse of :func:`moments_to_cumulants` (``cumulants[0]`` is ignored)."""
    kappa = np.asarray(cumulants, dtype=float)
    mu = np.zeros_like(kappa)
    mu[0] = 1.0
    for l in range(1, kappa.size):
        mu[l] = sum(math.comb(l - 1, k - 1) * kappa[k] * mu[l - k] for k in range(1, l + 1))
    return mu


def partitions_with_weights(r: int):
    """Nonnegative solutions of ``k_1 + 2 k_2 + ... + r k_r = r``.

    Yields ``(k, u)`` with ``k`` a tuple of length ``r`` and ``u = sum k``.
    """
    def rec(l, remaining):
        if l > r:
            if remaining == 0:
                yield ()
            return
        for kl in range(remaining // l + 1):
            for rest in rec(l + 1, remaining - l * kl):
                yield (kl,) + rest

    for k in rec(1, r):
        yield k, sum(k)


@lru_cache(maxsize=None)
def _two_point_cumulant_coefficient(r: int) -> Fraction:
    # kappa_{2r} / x^{2r} for the fair two-point law on {-x, x}: the Bell
    # polynomial sum restricted to even moment orders, all equal to x^{2l}.
    total = Fraction(0)
    for k, u in partitions_with_weights(r):
        denom = 1
        for l, kl in enumerate(k, start=1):
            denom *= math.factorial(kl) * math.factorial(2 * l) ** kl
        total += Fraction((-1) ** (u - 1) * math.factorial(u - 1) * math.factorial(2 * r), denom)
    return total


def conditional_cumulant(abs_value: float, order: int) -> float:
    """Cumulant of order ``order`` of the fair two-point law on ``{-x, +x}``.

    Given the absolute values, each summand is such a two-point variable, and
    only even orders survive. Values: ``x^2``, ``-2 x^4``, ``16 x^6``.
    """
    if order not in SUPPORTED_CONDITIONAL_ORDERS:
        raise UnsupportedOrderError(
            f"conditional cumulant order {order} not supported; use one of {SUPPORTED_CONDITIONAL_ORDERS}"
        )
    return float(_two_point_cumulant_coefficient(order // 2)) * float(abs_value) ** order


def conditional_cumulant_coefficient(order: int) -> float:
    if order not in SUPPORTED_CONDITIONAL_ORDERS:
        raise UnsupportedOrderError(f"conditional cumulant order {order} not supported")
    return float(_two_point_cumulant_coefficient(order // 2))


def set_partition_cumulant(moments: Sequence[float], order: int) -> float:
    """Brute-force cumulant via the sum over all set partitions of ``{1..order}``.

    ``kappa_n = sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_{B in pi} mu_{|B|}``.
    Exponential cost; intended as an independent oracle for small orders.
    """
    total = 0.0
    for blocks in _set_partitions(list(range(order))):
        b = len(blocks)
        total += (-1) ** (b - 1) * math.factorial(b - 1) * math.prod(moments[len(B)] for B in blocks)
    return total


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def sample_moment(values: np.ndarray, order: int) -> tuple[float, float]:
    """Sample moment of ``order`` and its standard error."""
    powers = values.astype(float) ** order
    return float(powers.mean()), float(powers.std(ddof=1) / math.sqrt(values.size))


__all__ = [
    "ArityError",
    "SymmetricLaw",
    "UnsupportedOrderError",
    "catalog",
    "conditional_cumulant",
    "cumulants_to_moments",
    "custom_law",
    "get_law",
    "moments_to_cumulants",
    "partitions_with_weights",
    "rng_for",
    "sample",
    "sample_matrix",
    "set_partition_cumulant",
]
