"""Poincaré / Poincaré–Dulac normal forms of polynomial vector fields.

Everything here works in modal coordinates ``z = V^{-1} x`` where the linear
part is ``diag(lambda)`` and the homological equation is diagonal.  The
normalizing map is ``z~ = phi(z) = z + h(z)``; a degree-``k`` term
``c z^m e_s`` of the field is removed by ``h_{s,m} = c / (lambda_s - (m, lambda))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigensystem import EigenSystem
from .errors import (
    BudgetExceeded,
    LinearPartMismatch,
    NoConvergence,
    NumericalFailure,
    RegimeNotEstablished,
    SmallDivisor,
)
from .participation import ParticipationMatrix, classic_pf
from .polynomial import (
    Poly,
    PolynomialMap,
    PolynomialVectorField,
    chop,
    homogeneous,
    padd,
    pcompose,
    pderiv,
    pmul,
    truncate,
    unit,
)
from .resonance import DEFAULT_MAX_ORDER, regime

DEFAULT_ORDER = 4
MAX_ORDER = 8
DEFAULT_BUDGET = 1_000_000
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class NormalFormTransform:
    """Result of :func:`compute_normal_form`.

    ``phi`` maps modal coordinates ``z`` to normal-form coordinates; ``w`` holds
    the resonant terms that survive, so that ``dz~/dt = diag(lambda) z~ + w(z~)``
    up to degree ``truncation_order``.  ``stages[k]`` keeps the homogeneous map
    solved at degree ``k``.
    """

    phi: PolynomialMap
    w: PolynomialVectorField
    lambdas: np.ndarray
    truncation_order: int
    small_divisor_floor: float
    divisor_tol: float
    stages: dict[int, dict] = field(default_factory=dict)

    @property
    def linearizes(self) -> bool:
        return not self.w.terms


def _term_count(comps: list[Poly]) -> int:
    return sum(len(p) for p in comps)


def to_modal(f: PolynomialVectorField, E: EigenSystem, *, atol: float = 1e-10) -> PolynomialVectorField:
    """Rewrite ``dx/dt = f(x)`` in eigen-coordinates ``z = L x``.

    Substitutes ``x = V z`` and left-multiplies by ``L = V^{-1}``; the linear part
    becomes exactly ``diag(lambda)``.  The result is checked against ``f`` at 20
    points with ``||x|| <= 0.1``.
    """
    if f.n != E.n:
        raise LinearPartMismatch(f"field has dimension {f.n}, eigensystem {E.n}")
    A = f.linear_part()
    scale = max(1.0, float(np.abs(E.A).max()))
    if np.abs(A - E.A).max() > 1e-12 * scale:
        raise LinearPartMismatch("linear part of the field differs from the eigensystem matrix")
    n, N = f.n, f.degree
    V, L = E.right, E.left
    subs = [{unit(n, j): V[k, j] for j in range(n) if V[k, j] != 0} for k in range(n)]
    fx = f.nonlinear_terms()
    comps_x: list[Poly] = [{} for _ in range(n)]
    for (s, m), c in fx.items():
        comps_x[s][m] = c
    fz = [pcompose(p, subs, N) for p in comps_x]
    coef_scale = max([abs(c) for c in fx.values()] + [1.0])
    out: list[Poly] = []
    for s in range(n):
        acc: Poly = {unit(n, s): E.eigenvalues[s]}
        for k in range(n):
            if L[s, k] != 0:
                acc = padd(acc, fz[k], L[s, k])
        out.append(chop(acc, 1e-15 * coef_scale))
    g = PolynomialVectorField.from_components(out, N)

    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, n))
    X *= 0.1 * rng.uniform(0, 1, (20, 1)) / np.linalg.norm(X, axis=1, keepdims=True)
    lhs = (g(X @ L.T)) @ V.T
    err = np.abs(lhs - f(X)).max()
    if err > atol:
        raise NumericalFailure(f"modal transformation check failed (error {err:.2e})")
    return g


def modal_eigenvalues(g: PolynomialVectorField, *, tol: float = 1e-12) -> np.ndarray:
    A = g.linear_part()
    off = A - np.diag(np.diag(A))
    if np.abs(off).max(initial=0.0) > tol * max(1.0, np.abs(A).max()):
        raise ValueError("field is not in modal coordinates (linear part not diagonal)")
    return np.diag(A).astype(complex)


def _invert_near_identity(h: list[Poly], n: int, k: int, N: int) -> list[Poly]:
    """Truncated inverse of ``z -> z + h(z)`` with ``h`` homogeneous of degree ``k``."""
    ident = [{unit(n, s): 1.0} for s in range(n)]
    psi = ident
    # each pass fixes k-1 more degrees
    for _ in range(math.ceil((N - 1) / (k - 1)) + 1):
        hp = [pcompose(p, psi, N) for p in h]
        psi = [padd(ident[s], hp[s], -1.0) for s in range(n)]
    return psi


def compute_normal_form(
    f_modal: PolynomialVectorField,
    N: int = DEFAULT_ORDER,
    divisor_tol: float | None = None,
    *,
    resonant: set | None = None,
    budget: int = DEFAULT_BUDGET,
) -> NormalFormTransform:
    """Remove every non-resonant term of degree ``2..N`` stage by stage.

    At stage ``k`` each degree-``k`` coefficient with divisor
    ``|lambda_s - (m, lambda)| > divisor_tol`` is cancelled; the others stay in
    the field and end up in ``w``.  After each stage the field is recomputed by
    exact substitution (truncated at ``N``) and ``phi`` is composed with the
    stage map.

    ``resonant`` optionally lists the ``(s, m)`` the caller has classified as
    resonant; a small divisor outside that set raises :class:`SmallDivisor`
    instead of being absorbed into ``w``.
    """
    if not 2 <= N <= MAX_ORDER:
        raise ValueError(f"truncation order must lie in [2, {MAX_ORDER}]")
    lam = modal_eigenvalues(f_modal)
    n = f_modal.n
    if divisor_tol is None:
        divisor_tol = 1e-8 * max(1.0, float(np.abs(lam).max()))
    resonant = None if resonant is None else {(s, tuple(m)) for s, m in resonant}

    G = [truncate(p, N) for p in f_modal.components()]
    phi: list[Poly] = [{unit(n, s): 1.0} for s in range(n)]
    coef_scale = max([abs(c) for c in f_modal.nonlinear_terms().values()] + [1.0])
    floor = math.inf
    stages: dict[int, dict] = {}

    def divisor(s, m):
        return lam[s] - np.dot(m, lam)

    for k in range(2, N + 1):
        h: list[Poly] = [{} for _ in range(n)]
        for s in range(n):
            for m, c in homogeneous(G[s], k).items():
                d = divisor(s, m)
                keep = abs(d) <= divisor_tol
                if resonant is not None:
                    if (s, m) in resonant:
                        keep = True
                    elif keep:
                        raise SmallDivisor(
                            f"divisor {abs(d):.3e} for term (s={s + 1}, m={m}) is below "
                            f"{divisor_tol:.3e} but the term was not declared resonant"
                        )
                if keep or c == 0:
                    continue
                h[s][m] = c / d
                floor = min(floor, abs(d))
        stages[k] = {(s, m): c for s in range(n) for m, c in h[s].items()}
        if not stages[k]:
            continue

        psi = _invert_near_identity(h, n, k, N)
        G_psi = [pcompose(p, psi, N) for p in G]
        Dh = [[pcompose(pderiv(h[s], j), psi, N) for j in range(n)] for s in range(n)]
        newG = []
        for s in range(n):
            acc = dict(G_psi[s])
            for j in range(n):
                if Dh[s][j]:
                    acc = padd(acc, pmul(Dh[s][j], G_psi[j], N))
            newG.append(acc)
        G = newG
        phi = [padd(phi[s], pcompose(h[s], phi, N)) for s in range(n)]
        if _term_count(G) + _term_count(phi) > budget:
            raise BudgetExceeded("normal-form term count exceeds the budget")

    # the pushed-forward field must be diag(lambda) z + (resonant terms) up to degree N
    w_terms: list[Poly] = [{} for _ in range(n)]
    for s in range(n):
        for m, c in G[s].items():
            d = sum(m)
            if d == 1:
                expected = lam[s] if m == unit(n, s) else 0.0
                if abs(c - expected) > RESIDUAL_TOL * max(1.0, abs(lam[s])):
                    raise NumericalFailure("linear part changed during normalization")
                continue
            is_res = (resonant is not None and (s, m) in resonant) or (
                resonant is None and abs(divisor(s, m)) <= divisor_tol
            )
            if is_res:
                if abs(c) > 1e-15 * coef_scale:
                    w_terms[s][m] = c
            elif abs(c) > RESIDUAL_TOL * coef_scale:
                raise NumericalFailure(
                    f"non-resonant coefficient {abs(c):.2e} survived normalization at (s={s + 1}, m={m})"
                )

    phi_map = PolynomialMap.from_components(phi, N, atol=1e-15 * coef_scale)
    w = PolynomialVectorField.from_components(w_terms, N)
    return NormalFormTransform(phi_map, w, lam, N, floor, float(divisor_tol), stages)


def evaluate_map(phi: PolynomialMap, z) -> np.ndarray:
    """``phi(z)`` at a point or stack of points."""
    return phi(np.asarray(z, dtype=complex))


def contraction_radius(phi: PolynomialMap, *, lipschitz: float = 1.0) -> float:
    """Radius (max-norm) within which ``z -> z~ - (phi(z) - z)`` is a contraction.

    Uses ``||D(phi - id)||_inf <= sum_d d * ||H_d|| * r^(d-1)`` with ``||H_d||``
    the largest absolute row sum of the degree-``d`` coefficients.
    """
    norms = phi.degree_norms()
    if not norms:
        return math.inf

    def lip(r):
        return sum(d * c * r ** (d - 1) for d, c in norms.items())

    lo, hi = 0.0, 1.0
    while lip(hi) < lipschitz:
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if lip(mid) < lipschitz else (lo, mid)
    return lo


def invert_map(phi: PolynomialMap, ztilde, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Solve ``phi(z) = ztilde`` by fixed-point iteration ``z <- ztilde - (phi(z) - z)``.

    Raises :class:`NoConvergence` when ``max_iter`` is reached, which means the
    point lies outside the region where the truncated map is invertible.
    """
    zt = np.asarray(ztilde, dtype=complex)
    z = zt.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            z = zt - phi.nonlinear(z)
            res = np.abs(phi(z) - zt).max(initial=0.0)
            if res <= tol:
                return z
            if not np.all(np.isfinite(z)):
                break
    raise NoConvergence(f"inverse iteration did not reach {tol:.1e} in {max_iter} steps")


def map_to_original(phi: PolynomialMap, E: EigenSystem, *, atol: float = 1e-14) -> PolynomialMap:
    """Express ``x -> V phi(V^{-1} x)`` as a near-identity map in the original coordinates."""
    n, N = phi.n, phi.degree
    V, L = E.right, E.left
    subs = [{unit(n, j): L[k, j] for j in range(n) if L[k, j] != 0} for k in range(n)]
    H: list[Poly] = [{} for _ in range(n)]
    for (s, m), c in phi.terms.items():
        H[s][m] = c
    Hz = [pcompose(p, subs, N) for p in H]
    out: list[Poly] = []
    for k in range(n):
        acc: Poly = {}
        for s in range(n):
            if V[k, s] != 0:
                acc = padd(acc, Hz[s], V[k, s])
        out.append(acc)
    scale = max([abs(c) for c in phi.terms.values()] + [1.0])
    # a real field has a real conjugating map; complex modes leave rounding-level imaginary parts
    if all(abs(complex(c).imag) <= 1e-12 * scale for p in out for c in p.values()):
        out = [{m: complex(c).real for m, c in p.items()} for p in out]
    return PolynomialMap.from_components(out, N, atol=atol * scale)


def mode_in_state_nonlinear(
    f: PolynomialVectorField,
    E: EigenSystem,
    nf: NormalFormTransform,
    *,
    max_order: int = DEFAULT_MAX_ORDER,
) -> ParticipationMatrix:
    """Mode-in-state factors of the nonlinear system ``dx/dt = f(x)``.

    When the linearization is non-resonant (Poincaré, formal or convergent) or
    the equilibrium is hyperbolic (Hartman–Grobman), the symmetric average of
    ``r^i_k phi_i(z0) / x_k(0)`` equals the linear ``l^i_k r^i_k``; the result
    records which theorem licensed it.
    """
    if not np.allclose(nf.lambdas, E.eigenvalues, rtol=0, atol=1e-9 * max(1.0, np.abs(E.eigenvalues).max())):
        raise ValueError("normal form was computed for a different spectrum")
    if f.n != E.n or np.abs(f.linear_part() - E.A).max() > 1e-12 * max(1.0, np.abs(E.A).max()):
        raise LinearPartMismatch("field does not match the eigensystem")
    reg = regime(E.eigenvalues, max_order=max_order)
    if not reg.linear_equivalence:
        raise RegimeNotEstablished(
            f"eigenvalues are resonant and the equilibrium is not hyperbolic "
            f"(regime: {reg.applicable_theorem.value})"
        )
    base = classic_pf(E)
    prov = {
        "theorem": reg.applicable_theorem.value,
        "resonance": reg.resonance.classification.value,
        "hyperbolic": reg.hyperbolic,
        "normal_form_linearizes": nf.linearizes,
        "truncation_order": nf.truncation_order,
    }
    return ParticipationMatrix(base.values, base.kind, base.method, None, prov)
