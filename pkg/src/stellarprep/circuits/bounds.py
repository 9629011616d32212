"""Error budgets for the truncated, product-formula squeezer.

Truncation: ``eps_trunc = N sqrt(N |c|) [G + g_leak]`` on a lattice of ``N``
sites with ``|c|`` core monomials per site, or ``sqrt(R/2 + 1) [G + g_leak]``
for one mode.  ``g_leak`` is the largest norm that ``S(r)|n1>`` (``n1 <= R``)
places above the cutoff.  ``G`` is a majorant built from path sums of the
matrix elements of the truncated generator, see :func:`path_majorant`.

Product formula: ``eps_trott = (N r^2 / 2K)(||[s0, s2]|| + ||[s1, s3]||)``,
or the looser closed form with ``beta``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from math import lgamma, log
from typing import Optional

import numpy as np

from ..ansatz import core_size
from ..fock import leak_probability
from .squeeze import ell, s_matrix

MAX_TAIL_TERMS = 10**6
TAIL_RATIO_FACTOR = 1.1


class BoundUnavailable(ValueError):
    """The path majorant does not exist for these arguments."""


class BudgetUnreachable(ValueError):
    """No cutoff within the search range meets the requested fidelity."""


def _log_term(d: int, n1: int, n2: int, r: float) -> float:
    p0 = abs(n2 - n1) // 2
    q0 = max(n1, n2)
    h = log(r / 2)
    return (
        p0 * h
        - 0.5 * (lgamma(n1 + 1) + lgamma(n2 + 1))
        + 2 * d * h
        + lgamma(q0 + 2 * d + 1)
        - lgamma(d + 1)
        - lgamma(p0 + d + 1)
    )


def _pair_majorant(r: float, lam: int, n1: int, n2: int) -> float:
    """Majorant for ``|<n2|S^lam(r) - S(r)|n1>|`` from paths leaving the cutoff."""
    q0 = max(n1, n2)
    d0 = (lam - q0 + 1) // 2 + 1
    if n1 == 0 and n2 == 0:
        # terms decrease monotonically with ratio below r^2
        return 2 * math.exp(_log_term(d0, 0, 0, r)) / (1 - r * r)
    q = TAIL_RATIO_FACTOR * r * r
    d = d0
    total = 0.0
    for _ in range(MAX_TAIL_TERMS):
        cur = _log_term(d, n1, n2, r)
        if math.exp(_log_term(d + 1, n1, n2, r) - cur) <= q:
            return 2 * total + 2 * math.exp(cur) / (1 - q)
        total += math.exp(cur)
        d += 1
    raise BoundUnavailable("tail-ratio scan exceeded its term cap")


def path_majorant(r: float, R: int, lam: int) -> float:
    """``G = max_{n1 <= R} sqrt(sum_{n2 <= lam, n2 = n1 mod 2} g(n1, n2)^2)``."""
    r = abs(r)
    if r == 0:
        return 0.0
    if TAIL_RATIO_FACTOR * r * r >= 1:
        raise BoundUnavailable(f"|r| = {r} is outside the range of the path majorant")
    best = 0.0
    for n1 in range(R + 1):
        acc = sum(_pair_majorant(r, lam, n1, n2) ** 2 for n2 in range(n1 % 2, lam + 1, 2))
        best = max(best, math.sqrt(acc))
    return best


@functools.lru_cache(maxsize=4096)
def _leak(r: float, n1: int, lam: int) -> float:
    return leak_probability(r, n1, lam)


def leak_norm(r: float, R: int, lam: int) -> float:
    """``g_leak = max_{n1 <= R} ||P_{> lam} S(r) |n1>||``."""
    if r == 0:
        return 0.0
    return max(math.sqrt(max(_leak(float(r), n1, lam), 0.0)) for n1 in range(R + 1))


def truncation_prefactor(R: int, Q: Optional[int], N: int) -> float:
    if Q is None:
        return math.sqrt(R / 2 + 1)
    return N * math.sqrt(N * core_size(R, Q))


def trunc_error(r: float, R: int, Q: Optional[int], N: int, lam: int) -> float:
    """Truncation bound; ``Q=None`` selects the single-mode prefactor."""
    if lam < R:
        raise ValueError("cutoff below the rank")
    if r == 0:
        return 0.0
    return truncation_prefactor(R, Q, N) * (path_majorant(r, R, lam) + leak_norm(r, R, lam))


@functools.lru_cache(maxsize=1024)
def commutator_norms(lam: int) -> float:
    """``||[s0, s2]|| + ||[s1, s3]||`` (spectral norms)."""
    s = [s_matrix(m, lam) for m in range(4)]

    def cn(a, b):
        return float(np.linalg.norm(a @ b - b @ a, 2))

    return cn(s[0], s[2]) + cn(s[1], s[3])


def beta(lam: int) -> float:
    """Closed-form majorant of :func:`commutator_norms`, summed over both pairs."""
    total = 0.0
    for m in (0, 1):
        for n in range(m, lam - 1, 4):
            total += 0.5 * ell(n) * (ell(n - 2) + ell(n + 2))
    return total


def trotter_error(r: float, lam: int, K: int, N: int = 1, mode: str = "exact_commutator") -> float:
    if K <= 0:
        raise ValueError("K must be positive")
    if mode == "exact_commutator":
        c = commutator_norms(lam)
    elif mode == "analytic_beta":
        c = beta(lam)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return N * r * r * c / (2 * K)


def fidelity_bound(eps: float) -> float:
    """``[1 - eps^2/2]^2`` for ``eps < 1``; 0 otherwise."""
    if eps >= 1:
        return 0.0
    return (1 - eps * eps / 2) ** 2


def eps_for_fidelity(F0: float) -> float:
    """Largest ``eps`` with ``[1 - eps^2/2]^2 >= F0``."""
    if not 0 < F0 <= 1:
        raise ValueError("F0 must lie in (0, 1]")
    return math.sqrt(2 * (1 - math.sqrt(F0)))


@dataclass
class ErrorBudget:
    eps_trunc: float
    eps_trott: float
    lam: int
    k_layers: int
    fidelity_lower: float = float("nan")
    r: float = 0.0
    R: int = 0
    Q: Optional[int] = None
    N: int = 1
    F0: float = float("nan")

    def __post_init__(self):
        self.fidelity_lower = fidelity_bound(self.eps_trunc + self.eps_trott)

    def csv_row(self) -> dict:
        return {
            "r": self.r,
            "R": self.R,
            "Q": "" if self.Q is None else self.Q,
            "N": self.N,
            "F0": self.F0,
            "lam": self.lam,
            "K": self.k_layers,
            "eps_trunc": self.eps_trunc,
            "eps_trott": self.eps_trott,
            "fidelity_lower": self.fidelity_lower,
        }


def min_resources(
    r: float,
    R: int,
    Q: Optional[int],
    N: int,
    F0: float,
    lam_max: int = 200,
) -> ErrorBudget:
    """Smallest cutoff, then fewest layers, with each error at most ``eps/2``.

    ``eps`` solves ``[1 - eps^2/2]^2 = F0``.  The cutoff is scanned upward from
    ``R``; the layer count is the least ``K`` with ``eps_trott <= eps/2``.
    """
    eps = eps_for_fidelity(F0)
    half = eps / 2
    lam = R
    while True:
        if lam > lam_max:
            raise BudgetUnreachable(f"no cutoff up to {lam_max} meets F0={F0} at r={r}")
        et = trunc_error(r, R, Q, N, lam)
        if et <= half:
            break
        lam += 1
    if r == 0:
        return ErrorBudget(0.0, 0.0, lam, 1, r=r, R=R, Q=Q, N=N, F0=F0)
    unit = trotter_error(r, lam, 1, N)
    K = max(1, math.ceil(unit / half))
    # guard the ceiling against rounding at the boundary
    while K > 1 and trotter_error(r, lam, K - 1, N) <= half:
        K -= 1
    while trotter_error(r, lam, K, N) > half:
        K += 1
    return ErrorBudget(et, trotter_error(r, lam, K, N), lam, K, r=r, R=R, Q=Q, N=N, F0=F0)
