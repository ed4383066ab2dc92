"""Truncated multivariate polynomials and polynomial vector fields/maps.

A scalar polynomial is a ``dict`` from exponent tuples to (complex) coefficients.
Products and compositions are truncated at a maximum total degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch

Poly = dict  # dict[tuple[int, ...], complex]
Term = tuple[int, tuple[int, ...]]  # (component s, exponents m), 0-based component


def degree_of(m: Iterable[int]) -> int:
    return sum(m)


def padd(a: Poly, b: Poly, scale: complex = 1.0) -> Poly:
    out = dict(a)
    for m, c in b.items():
        out[m] = out.get(m, 0.0) + scale * c
    return out


def pmul(a: Poly, b: Poly, maxdeg: int) -> Poly:
    out: Poly = {}
    for ma, ca in a.items():
        da = sum(ma)
        for mb, cb in b.items():
            if da + sum(mb) > maxdeg:
                continue
            m = tuple(x + y for x, y in zip(ma, mb))
            out[m] = out.get(m, 0.0) + ca * cb
    return out


def pderiv(a: Poly, k: int) -> Poly:
    out: Poly = {}
    for m, c in a.items():
        if m[k] == 0:
            continue
        mm = list(m)
        mm[k] -= 1
        out[tuple(mm)] = out.get(tuple(mm), 0.0) + c * m[k]
    return out


def homogeneous(a: Poly, d: int) -> Poly:
    return {m: c for m, c in a.items() if sum(m) == d}


def truncate(a: Poly, maxdeg: int) -> Poly:
    return {m: c for m, c in a.items() if sum(m) <= maxdeg}


def chop(a: Poly, atol: float) -> Poly:
    return {m: c for m, c in a.items() if abs(c) > atol}


def unit(n: int, k: int) -> tuple[int, ...]:
    return tuple(1 if j == k else 0 for j in range(n))


def pcompose(p: Poly, subs: list[Poly], maxdeg: int) -> Poly:
    """``p(subs[0], ..., subs[n-1])`` truncated at ``maxdeg``.

    Assumes every substituted polynomial has no constant term, so each factor
    raises the degree by at least one.
    """
    n = len(subs)
    zero = tuple([0] * n)
    powers: list[list[Poly]] = [[{zero: 1.0}] for _ in range(n)]

    def power(k: int, e: int) -> Poly:
        while len(powers[k]) <= e:
            powers[k].append(pmul(powers[k][-1], subs[k], maxdeg))
        return powers[k][e]

    out: Poly = {}
    for m, c in p.items():
        if sum(m) > maxdeg:
            continue
        acc: Poly = {zero: c}
        for k, e in enumerate(m):
            if e:
                acc = pmul(acc, power(k, e), maxdeg)
        for mm, cc in acc.items():
            out[mm] = out.get(mm, 0.0) + cc
    return out


@dataclass(frozen=True, eq=False)
class PolynomialVectorField:
    """``f(x) = sum_{s,m} c_{s,m} x^m e_s`` with ``1 <= |m| <= degree``.

    ``terms`` maps ``(s, m)`` (0-based component) to a coefficient.  There is
    never a constant term: the origin is an equilibrium.
    """

    n: int
    degree: int
    terms: Mapping[Term, complex]

    def __post_init__(self):
        for (s, m), c in self.terms.items():
            if len(m) != self.n or not 0 <= s < self.n:
                raise DimensionMismatch(f"term {(s, m)} does not fit dimension {self.n}")
            if sum(m) < 1:
                raise ValueError("constant terms are not allowed (f(0) must be 0)")
            if sum(m) > self.degree:
                raise ValueError(f"term {(s, m)} exceeds degree {self.degree}")
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for term {(s, m)}")

    @classmethod
    def from_components(cls, comps: list[Poly], degree: int | None = None, atol: float = 0.0):
        n = len(comps)
        terms = {}
        for s, p in enumerate(comps):
            for m, c in p.items():
                if sum(m) >= 1 and abs(c) > atol:
                    terms[(s, tuple(m))] = c
        if degree is None:
            degree = max([sum(m) for _, m in terms] + [1])
        return cls(n, degree, terms)

    @classmethod
    def linear(cls, A) -> "PolynomialVectorField":
        A = np.asarray(A)
        n = A.shape[0]
        terms = {(s, unit(n, k)): A[s, k] for s in range(n) for k in range(n) if A[s, k] != 0}
        return cls(n, 1, terms)

    def components(self) -> list[Poly]:
        comps: list[Poly] = [{} for _ in range(self.n)]
        for (s, m), c in self.terms.items():
            comps[s][m] = c
        return comps

    def linear_part(self) -> np.ndarray:
        dtype = complex if self.is_complex else float
        A = np.zeros((self.n, self.n), dtype=dtype)
        for (s, m), c in self.terms.items():
            if sum(m) == 1:
                A[s, m.index(1)] = c if self.is_complex else complex(c).real
        return A

    def nonlinear_terms(self) -> dict[Term, complex]:
        return {t: c for t, c in self.terms.items() if sum(t[1]) >= 2}

    @property
    def is_complex(self) -> bool:
        return any(np.iscomplexobj(c) and complex(c).imag != 0 for c in self.terms.values())

    @cached_property
    def _compiled(self):
        keys = sorted({m for _, m in self.terms})
        index = {m: j for j, m in enumerate(keys)}
        E = np.array(keys, dtype=int).reshape(-1, self.n)
        C = np.zeros((self.n, len(keys)), dtype=complex if self.is_complex else float)
        for (s, m), c in self.terms.items():
            C[s, index[m]] = c if self.is_complex else complex(c).real
        return E, C

    def __call__(self, x) -> np.ndarray:
        """Evaluate at a point or a stack of points (rows)."""
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise DimensionMismatch(f"point has dimension {x.shape[-1]}, field has {self.n}")
        E, C = self._compiled
        if not len(E):
            return np.zeros_like(x, dtype=np.result_type(x, C))
        mons = np.prod(x[..., None, :] ** E, axis=-1)
        return mons @ C.T

    def coefficient(self, s: int, m) -> complex:
        return self.terms.get((s, tuple(m)), 0.0)


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """Near-identity map ``y -> y + sum_{s,m} c_{s,m} y^m e_s`` (all ``|m| >= 2``).

    ``terms`` holds only the higher-order part; the identity is implicit.
    """

    n: int
    degree: int
    terms: Mapping[Term, complex]

    def __post_init__(self):
        for (s, m) in self.terms:
            if len(m) != self.n or sum(m) < 2:
                raise ValueError(f"map term {(s, m)} must have degree >= 2 in dimension {self.n}")

    @classmethod
    def identity(cls, n: int, degree: int = 1) -> "PolynomialMap":
        return cls(n, degree, {})

    @classmethod
    def from_components(cls, comps: list[Poly], degree: int, atol: float = 0.0) -> "PolynomialMap":
        terms = {}
        for s, p in enumerate(comps):
            for m, c in p.items():
                if sum(m) >= 2 and abs(c) > atol:
                    terms[(s, tuple(m))] = c
        return cls(len(comps), degree, terms)

    def components(self) -> list[Poly]:
        """Full components including the identity part."""
        comps: list[Poly] = [{unit(self.n, s): 1.0} for s in range(self.n)]
        for (s, m), c in self.terms.items():
            comps[s][m] = comps[s].get(m, 0.0) + c
        return comps

    @cached_property
    def _field(self) -> PolynomialVectorField:
        return PolynomialVectorField(self.n, max(self.degree, 2), dict(self.terms))

    def nonlinear(self, z) -> np.ndarray:
        """``phi(z) - z``."""
        return self._field(z)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z)
        return z + self._field(z)

    def coefficient(self, s: int, m) -> complex:
        return self.terms.get((s, tuple(m)), 0.0)

    def degree_norms(self) -> dict[int, float]:
        """Per degree ``d``: ``max_s sum_m |c_{s,m}|`` over terms of that degree."""
        acc: dict[int, np.ndarray] = {}
        for (s, m), c in self.terms.items():
            d = sum(m)
            acc.setdefault(d, np.zeros(self.n))[s] += abs(c)
        return {d: float(v.max()) for d, v in acc.items()}
