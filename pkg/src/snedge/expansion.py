"""Edgeworth approximations for self-normalized sums.

Two families live here. The unconditional approximations ``Phi^Q_{m,n}`` and
``phi^q_{m,n}`` depend on the moments of ``X_1`` only. The conditional ones
fix the absolute values ``|X_1|, ..., |X_n|`` (a :class:`ConditionalConfig`),
under which every summand is a fair two-point variable and the expansion
coefficients are the normalized cumulant sums ``lambda_l``.

Only symmetric inputs are handled: odd cumulants vanish, so all odd-index
correction terms are identically zero and the surviving characteristic
function terms are real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .distributions import (
    ArityError,
    SymmetricLaw,
    UnsupportedOrderError,
    conditional_cumulant_coefficient,
    partitions_with_weights,
)
from .special_math import hermite_eval, normal_cdf, normal_pdf

MIN_M, MAX_M = 2, 6
MAX_R = MAX_M - 2

Moments = Union[SymmetricLaw, Mapping[int, float], Sequence[float]]


class DegenerateConfigError(ValueError):
    pass


def _check_m(m: int) -> None:
    if not MIN_M <= m <= MAX_M:
        raise UnsupportedOrderError(
            f"m={m} unsupported: closed forms exist for m in {MIN_M}..{MAX_M} only"
        )


def _check_r(r: int) -> None:
    if r < 1:
        raise ValueError("r must be positive")
    if r > MAX_R:
        raise UnsupportedOrderError(f"no closed form for correction term r={r} (max {MAX_R})")


# ---------------------------------------------------------------------------
# Conditional configuration


@dataclass(frozen=True, eq=False)
class ConditionalConfig:
    """One realization of ``|X_1|, ..., |X_n|`` and derived quantities."""

    abs_values: np.ndarray

    def __post_init__(self):
        a = np.abs(np.asarray(self.abs_values, dtype=float)).ravel()
        if a.size == 0:
            raise ValueError("configuration needs at least one value")
        a.setflags(write=False)
        object.__setattr__(self, "abs_values", a)

    @classmethod
    def from_sample(cls, x) -> "ConditionalConfig":
        return cls(np.abs(np.asarray(x, dtype=float)))

    @property
    def n(self) -> int:
        return self.abs_values.size

    @property
    def V(self) -> float:
        return math.sqrt(math.fsum(self.abs_values**2))

    @property
    def M(self) -> float:
        return float(self.abs_values.max())

    @property
    def B(self) -> float:
        # V = 0 iff M = 0; B := 1 there.
        M = self.M
        return 1.0 if M == 0 else self.V / M


def L_tilde(config: ConditionalConfig, k: int) -> float:
    """Lyapunov ratio ``V^{-k} sum |x_j|^k``; zero for the all-zero configuration."""
    if k < 2:
        raise ValueError("L_tilde needs k >= 2")
    V = config.V
    if V == 0:
        return 0.0
    # Scale first so large k cannot overflow.
    return math.fsum((config.abs_values / V) ** k)


def lambda_tilde(config: ConditionalConfig, l: int) -> float:
    """Normalized conditional cumulant sum ``V^{-l} sum_j kappa_{l,j}``."""
    coeff = conditional_cumulant_coefficient(l)
    V = config.V
    if V == 0:
        return 0.0
    return coeff * math.fsum((config.abs_values / V) ** l)


def _lambdas(config: ConditionalConfig, r_max: int) -> dict[int, float]:
    # Even lambdas needed for correction terms up to r_max; odd ones are zero.
    return {l: lambda_tilde(config, l) for l in range(4, r_max + 3, 2)}


@lru_cache(maxsize=None)
def _partition_shapes(r: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    return tuple(partitions_with_weights(r))


def conditional_terms(lambdas: Mapping[int, float], r: int) -> dict[int, float]:
    """Coefficients of the r-th conditional correction keyed by power ``r + 2u``.

    Sums ``prod_l (lambda_{l+2}/(l+2)!)^{k_l} / k_l!`` over the solutions of
    ``k_1 + 2k_2 + ... + r k_r = r``; any term using an odd-order lambda is
    zero and skipped.
    """
    out: dict[int, float] = {}
    for k, u in _partition_shapes(r):
        if any(kl and (l + 2) % 2 for l, kl in enumerate(k, start=1)):
            continue
        coeff = 1.0
        for l, kl in enumerate(k, start=1):
            if kl:
                coeff *= (lambdas[l + 2] / math.factorial(l + 2)) ** kl / math.factorial(kl)
        power = r + 2 * u
        out[power] = out.get(power, 0.0) + coeff
    return out


def P_tilde(config: ConditionalConfig, r: int, x):
    """Conditional distribution-function correction ``P_r``."""
    _check_r(r)
    if r % 2:
        return 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0
    terms = conditional_terms(_lambdas(config, r), r)
    return -normal_pdf(x) * sum(c * hermite_eval(p - 1, x) for p, c in terms.items())


def p_tilde(config: ConditionalConfig, r: int, x):
    """Conditional density correction ``p_r = d/dx P_r``."""
    _check_r(r)
    if r % 2:
        return 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0
    terms = conditional_terms(_lambdas(config, r), r)
    return normal_pdf(x) * sum(c * hermite_eval(p, x) for p, c in terms.items())


def P_tilde_closed(config: ConditionalConfig, r: int, x):
    """Hand-reduced forms of ``P_2`` and ``P_4``; a cross-check on the partition sum."""
    _check_r(r)
    if r % 2:
        return 0.0
    l4 = lambda_tilde(config, 4) / 24.0
    if r == 2:
        return -normal_pdf(x) * hermite_eval(3, x) * l4
    l6 = lambda_tilde(config, 6) / 720.0
    return -normal_pdf(x) * (hermite_eval(7, x) * 0.5 * l4**2 + hermite_eval(5, x) * l6)


def cond_cdf_expansion(config: ConditionalConfig, m: int, x):
    _check_m(m)
    out = normal_cdf(x)
    for r in range(2, m - 1, 2):
        out = out + P_tilde(config, r, x)
    return out


def cond_pdf_expansion(config: ConditionalConfig, m: int, x):
    _check_m(m)
    out = normal_pdf(x)
    for r in range(2, m - 1, 2):
        out = out + p_tilde(config, r, x)
    return out


def cond_charfn(config: ConditionalConfig, t):
    """Conditional characteristic function ``prod_j cos(t |x_j| / V)`` of ``T_n``."""
    V = config.V
    if V == 0:
        raise DegenerateConfigError("characteristic function undefined for V = 0")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    w = config.abs_values / V
    out = np.prod(np.cos(np.outer(t_arr, w)), axis=1)
    return out if np.ndim(t) else float(out[0])


def _real_power_of_it(power: int) -> float:
    # (it)^p = i^p t^p; symmetric inputs leave only even p, where i^p is real.
    assert power % 2 == 0, "odd power of (it) would make the transform complex"
    return -1.0 if (power // 2) % 2 else 1.0


def expansion_charfn(config: ConditionalConfig, m: int, t):
    """Fourier transform of the conditional expansion: ``e^{-t^2/2}(1 + sum_r U_r(it))``."""
    _check_m(m)
    t = np.asarray(t, dtype=float)
    lambdas = _lambdas(config, m - 2)
    poly = np.ones_like(t)
    for r in range(2, m - 1, 2):
        for p, c in conditional_terms(lambdas, r).items():
            poly = poly + c * _real_power_of_it(p) * t**p
    out = np.exp(-0.5 * t * t) * poly
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Unconditional approximations


def _moment_lookup(moments: Moments, k: int) -> Optional[float]:
    if isinstance(moments, SymmetricLaw):
        v = moments.moments[k]
    elif isinstance(moments, Mapping):
        v = moments.get(k)
    else:
        v = moments[k] if k < len(moments) else None
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    return float(v)


def unconditional_terms(r: int, mu4: float, mu6: Optional[float] = None) -> dict[int, float]:
    """Hermite coefficients of ``q_r`` (keyed by Hermite degree); ``Q_r`` uses degree - 1."""
    _check_r(r)
    if r % 2:
        return {}
    if r == 2:
        return {4: -mu4 / 12.0}
    if mu6 is None:
        raise ArityError("Q_4 / q_4 need mu_6")
    return {
        8: mu4**2 / 288.0,
        6: mu6 / 45.0,
        4: (2.0 * mu6 + mu4 - 3.0 * mu4**2) / 12.0,
    }


def Q_r(x, r: int, mu4: float, mu6: Optional[float] = None):
    """Distribution-function correction ``Q_r`` (zero for odd r)."""
    terms = unconditional_terms(r, mu4, mu6)
    if not terms:
        return 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0
    return -normal_pdf(x) * sum(c * hermite_eval(p - 1, x) for p, c in terms.items())


def q_r(x, r: int, mu4: float, mu6: Optional[float] = None):
    """Density correction ``q_r = d/dx Q_r`` (zero for odd r)."""
    terms = unconditional_terms(r, mu4, mu6)
    if not terms:
        return 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0
    return normal_pdf(x) * sum(c * hermite_eval(p, x) for p, c in terms.items())


@dataclass(frozen=True)
class EdgeworthApprox:
    """Evaluable ``Phi^Q_{m,n}`` (kind ``"cdf"``) or ``phi^q_{m,n}`` (kind ``"pdf"``)."""

    m: int
    n: int
    mu4: Optional[float]
    mu6: Optional[float]
    kind: str = "cdf"

    def __post_init__(self):
        _check_m(self.m)
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.kind not in ("cdf", "pdf"):
            raise ValueError("kind must be 'cdf' or 'pdf'")
        if self.m >= 4 and self.mu4 is None:
            raise ArityError(f"m={self.m} needs mu_4")
        if self.m >= 6 and self.mu6 is None:
            raise ArityError(f"m={self.m} needs mu_6")

    def correction(self, r: int, x):
        f = Q_r if self.kind == "cdf" else q_r
        return f(x, r, self.mu4, self.mu6) * self.n ** (-r / 2)

    def __call__(self, x):
        out = normal_cdf(x) if self.kind == "cdf" else normal_pdf(x)
        for r in range(2, self.m - 1, 2):
            out = out + self.correction(r, x)
        return out


def _build(m: int, n: int, moments: Moments, kind: str) -> EdgeworthApprox:
    _check_m(m)
    mu4 = _moment_lookup(moments, 4) if m >= 4 else None
    mu6 = _moment_lookup(moments, 6) if m >= 6 else None
    return EdgeworthApprox(m, n, mu4, mu6, kind)


def edgeworth_cdf(m: int, n: int, moments: Moments) -> EdgeworthApprox:
    return _build(m, n, moments, "cdf")


def edgeworth_pdf(m: int, n: int, moments: Moments) -> EdgeworthApprox:
    return _build(m, n, moments, "pdf")


# ---------------------------------------------------------------------------
# Batched conditional quantities: rows of ``abs_matrix`` are configurations.


def batch_power_sums(abs_matrix: np.ndarray, orders: Sequence[int]) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Return ``V`` per row and ``sum_j (|x_j|/V)^k`` for each requested k (0 where V = 0)."""
    a = np.abs(np.asarray(abs_matrix, dtype=float))
    V = np.sqrt(np.einsum("ij,ij->i", a, a))
    safe = np.where(V > 0, V, 1.0)
    w = a / safe[:, None]
    sums = {k: (w**k).sum(axis=1) for k in orders}
    return V, sums


def batch_lambda(abs_matrix: np.ndarray, l: int) -> np.ndarray:
    coeff = conditional_cumulant_coefficient(l)
    _, sums = batch_power_sums(abs_matrix, [l])
    return coeff * sums[l]


def batch_cond_cdf_expansion(abs_matrix: np.ndarray, m: int, x) -> np.ndarray:
    """Conditional ``Phi^P_{m,n}`` for many configurations at grid ``x``: shape ``(rows, len(x))``."""
    _check_m(m)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.broadcast_to(normal_cdf(x), (np.shape(abs_matrix)[0], x.size)).copy()
    if m < 4:
        return out
    _, sums = batch_power_sums(abs_matrix, [4, 6])
    l4 = conditional_cumulant_coefficient(4) * sums[4] / 24.0
    ph = normal_pdf(x)
    out -= np.outer(l4, ph * hermite_eval(3, x))
    if m >= 6:
        l6 = conditional_cumulant_coefficient(6) * sums[6] / 720.0
        out -= np.outer(0.5 * l4**2, ph * hermite_eval(7, x)) + np.outer(l6, ph * hermite_eval(5, x))
    return out
