"""Eigenvalue resonances, resonant monomials, and linearization-regime diagnostics.

Mode indices in these reports are 0-based; the CLI prints them 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations_with_replacement

import numpy as np

from .errors import BudgetExceeded

MAX_ORDER_GUARD = 20
DEFAULT_MAX_ORDER = 10
DEFAULT_BUDGET = 1_000_000
NEAR_FACTOR = 1e3


class Classification(str, Enum):
    NON_RESONANT = "NonResonant"
    RESONANT = "Resonant"


class Theorem(str, Enum):
    POINCARE = "Poincare"
    POINCARE_SIEGEL = "PoincareSiegel"
    POINCARE_DULAC = "PoincareDulac"
    HARTMAN_GROBMAN = "HartmanGrobman"
    NONE = "None"


# theorems under which mode-in-state factors equal those of the linearization
LINEAR_EQUIVALENCE = (Theorem.POINCARE, Theorem.POINCARE_SIEGEL, Theorem.HARTMAN_GROBMAN)


@dataclass(frozen=True)
class Resonance:
    mode: int
    m: tuple[int, ...]
    order: int
    residual: float


@dataclass(frozen=True)
class ResonanceReport:
    """Resonances ``(m, lambda) = lambda_s`` with ``2 <= |m| <= max_order_checked``.

    ``complete`` is True when the absence of resonances above ``max_order_checked``
    is certified (Poincaré domain with a small enough order bound); otherwise the
    report only speaks for the orders it enumerated.
    """

    entries: tuple[Resonance, ...]
    near: tuple[Resonance, ...]
    max_order_checked: int
    tol: float
    complete: bool
    min_residual_by_order: dict[int, float] = field(default_factory=dict)

    @property
    def classification(self) -> Classification:
        return Classification.RESONANT if self.entries else Classification.NON_RESONANT


def default_tol(lambdas) -> float:
    return 1e-9 * max(1.0, float(np.max(np.abs(lambdas))))


def multi_indices(n: int, order: int) -> np.ndarray:
    """All exponent vectors of total degree ``order``, lexicographically ascending."""
    rows = []
    for combo in combinations_with_replacement(range(n), order):
        m = [0] * n
        for k in combo:
            m[k] += 1
        rows.append(m)
    rows.sort()
    return np.array(rows, dtype=int).reshape(-1, n)


def candidate_count(n: int, max_order: int) -> int:
    return n * sum(math.comb(n + k - 1, k) for k in range(2, max_order + 1))


def _poincare_domain(lam: np.ndarray, tol: float) -> bool:
    re = lam.real
    return bool(np.all(re > tol) or np.all(re < -tol))


def _order_bound(lam: np.ndarray, tol: float) -> int | None:
    """Largest order at which a resonance is possible, if the spectrum is in the Poincaré domain.

    With every ``|Re lambda|`` in ``[a, b]`` and one common sign,
    ``|Re (m, lambda)| >= |m| a`` while ``|Re lambda_s| <= b``.
    """
    if not _poincare_domain(lam, tol):
        return None
    re = np.abs(lam.real)
    return int(math.floor((re.max() + tol) / re.min()))


def detect_resonances(
    lambdas,
    max_order: int = DEFAULT_MAX_ORDER,
    tol: float | None = None,
    *,
    budget: int = DEFAULT_BUDGET,
) -> ResonanceReport:
    """Enumerate every ``(s, m)`` with ``|(m, lambda) - lambda_s| <= tol``.

    Entries come out ordered by ``(order, s, m)``.  Candidates with a residual in
    ``(tol, 1e3 * tol]`` are returned separately as near-resonances: they are the
    small divisors the normal-form computation will meet.
    """
    lam = np.asarray(lambdas, dtype=complex).ravel()
    n = len(lam)
    if not 2 <= max_order <= MAX_ORDER_GUARD:
        raise ValueError(f"max_order must lie in [2, {MAX_ORDER_GUARD}]")
    tol = default_tol(lam) if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    total = candidate_count(n, max_order)
    if total > budget:
        raise BudgetExceeded(f"{total} candidates exceed the budget of {budget}")

    entries, near, min_by_order = [], [], {}
    for order in range(2, max_order + 1):
        M = multi_indices(n, order)
        res = np.abs((M @ lam)[:, None] - lam[None, :])  # (candidates, s)
        min_by_order[order] = float(res.min())
        for s in range(n):
            for idx in np.flatnonzero(res[:, s] <= NEAR_FACTOR * tol):
                r = Resonance(s, tuple(int(v) for v in M[idx]), order, float(res[idx, s]))
                (entries if r.residual <= tol else near).append(r)

    bound = _order_bound(lam, tol)
    complete = bound is not None and bound <= max_order
    return ResonanceReport(tuple(entries), tuple(near), max_order, tol, complete, min_by_order)


def resonant_monomials(lambdas, max_order: int = DEFAULT_MAX_ORDER, tol: float | None = None,
                       **kw) -> list[tuple[tuple[int, ...], int]]:
    """Resonant monomials ``z^m e_s`` as ``(m, s)`` pairs, in report order."""
    return [(r.m, r.mode) for r in detect_resonances(lambdas, max_order, tol, **kw).entries]


@dataclass(frozen=True)
class SiegelDiagnostic:
    """Finite-order lower-bound certificate for the small-divisor condition.

    ``C`` is the minimum of ``|lambda_s - (m, lambda)| * |m|**nu`` over the
    multi-indices checked; it proves nothing about orders above ``max_order``.
    """

    nu: float
    C: float
    max_order: int
    per_order: dict[int, float]


@dataclass(frozen=True)
class RegimeReport:
    hyperbolic: bool
    poincare_domain: bool
    siegel: SiegelDiagnostic
    applicable_theorem: Theorem
    resonance: ResonanceReport

    @property
    def linear_equivalence(self) -> bool:
        return self.applicable_theorem in LINEAR_EQUIVALENCE


def regime(
    lambdas,
    max_order: int = DEFAULT_MAX_ORDER,
    tol: float | None = None,
    nu: float = 1.0,
) -> RegimeReport:
    """Decide which linearization theorem covers the equilibrium.

    * non-resonant and in the Poincaré domain with the check certified complete:
      ``PoincareSiegel`` (convergent linearizing series);
    * otherwise non-resonant up to ``max_order``: ``Poincare`` (formal);
    * resonant but hyperbolic: ``HartmanGrobman``;
    * resonant, not hyperbolic, no zero eigenvalue: ``PoincareDulac`` (a normal
      form exists, participation equivalence is not claimed);
    * anything else: ``None``.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    lam = np.asarray(lambdas, dtype=complex).ravel()
    tol = default_tol(lam) if tol is None else float(tol)
    rep = detect_resonances(lam, max_order, tol)
    hyperbolic = bool(np.all(np.abs(lam.real) > tol))
    pdomain = _poincare_domain(lam, tol)
    per_order = {k: v * k**nu for k, v in rep.min_residual_by_order.items()}
    siegel = SiegelDiagnostic(nu, min(per_order.values()), max_order, per_order)

    if rep.classification is Classification.NON_RESONANT:
        theorem = Theorem.POINCARE_SIEGEL if (pdomain and rep.complete) else Theorem.POINCARE
    elif hyperbolic:
        theorem = Theorem.HARTMAN_GROBMAN
    elif np.all(np.abs(lam) > tol):
        theorem = Theorem.POINCARE_DULAC
    else:
        theorem = Theorem.NONE
    return RegimeReport(hyperbolic, pdomain, siegel, theorem, rep)
