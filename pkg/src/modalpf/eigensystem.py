"""Eigenvalues and biorthogonally normalized right/left eigenvectors of a state matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NumericalFailure, RepeatedEigenvalues

BIORTHO_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral data of ``A``.

    Attributes
    ----------
    A : ndarray, shape (n, n)
        The state matrix the decomposition was computed from.
    eigenvalues : ndarray of complex, shape (n,)
    right : ndarray of complex, shape (n, n)
        Column ``i`` is the right eigenvector ``r^i`` (unit 2-norm).
    left : ndarray of complex, shape (n, n)
        Row ``i`` is the left eigenvector ``l^i``; ``left @ right == I``.
    distinct_tol : float
        Minimum eigenvalue gap accepted when the system was built.
    """

    A: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    distinct_tol: float

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.eigenvalues.imag == 0))

    def conjugate_pairs(self) -> list[tuple[int, ...]]:
        """Group mode indices: ``(i,)`` for real modes, ``(i, i+1)`` for conjugate pairs."""
        groups = []
        i = 0
        lam = self.eigenvalues
        while i < self.n:
            if lam[i].imag > 0 and i + 1 < self.n and lam[i + 1] == np.conj(lam[i]):
                groups.append((i, i + 1))
                i += 2
            else:
                groups.append((i,))
                i += 1
        return groups

    def biorthogonality_error(self) -> float:
        return float(np.max(np.abs(self.left @ self.right - np.eye(self.n))))

    def reconstruction_error(self) -> float:
        # sum_i r^i l^i == V L
        return float(np.max(np.abs(self.right @ self.left - np.eye(self.n))))


def _sort_order(lam: np.ndarray) -> np.ndarray:
    # descending real part, then descending imaginary part; |Im| as the middle key
    # keeps conjugate partners adjacent when several modes share a real part
    return np.array(
        sorted(range(len(lam)), key=lambda i: (-lam[i].real, -abs(lam[i].imag), -lam[i].imag)),
        dtype=int,
    )


def _fix_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def eigendecompose(A, distinct_tol: float | None = None) -> EigenSystem:
    """Decompose ``A`` into eigenvalues and biorthonormal eigenvector sets.

    Right eigenvectors get unit 2-norm with their largest-magnitude entry real and
    positive; left eigenvectors are the rows of ``V^{-1}``, so ``l^i r^j = delta_ij``
    by construction.

    Raises
    ------
    RepeatedEigenvalues
        Some pair of eigenvalues is closer than ``distinct_tol``
        (default ``1e-8 * ||A||_inf``).
    NumericalFailure
        Non-finite input, or the eigenbasis is too ill-conditioned for the
        biorthogonality check to hold at ``1e-9``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"state matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("state matrix has non-finite entries")
    n = A.shape[0]
    if distinct_tol is None:
        distinct_tol = 1e-8 * np.linalg.norm(A, np.inf)

    try:
        lam, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition did not converge: {exc}") from exc
    lam = lam.astype(complex)
    vecs = vecs.astype(complex)

    if n > 1:
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(n, np.inf))
        gap = float(gaps.min())
        if gap <= distinct_tol:
            raise RepeatedEigenvalues(
                f"eigenvalue gap {gap:.3e} <= distinct_tol {distinct_tol:.3e}"
            )

    order = _sort_order(lam)
    lam = lam[order]
    vecs = vecs[:, order]

    V = np.empty_like(vecs)
    for i in range(n):
        if lam[i].imag < 0 and i > 0 and lam[i - 1] == np.conj(lam[i]):
            V[:, i] = np.conj(V[:, i - 1])
        else:
            V[:, i] = _fix_phase(vecs[:, i])

    try:
        L = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("eigenvector matrix is singular") from exc

    E = EigenSystem(_frozen(A), _frozen(lam), _frozen(V), _frozen(L), float(distinct_tol))
    err = max(E.biorthogonality_error(), E.reconstruction_error())
    if not np.isfinite(err) or err > BIORTHO_TOL:
        raise NumericalFailure(f"eigenbasis too ill-conditioned (biorthogonality error {err:.2e})")
    return E


def modal_coordinates(E: EigenSystem, x) -> np.ndarray:
    """``z_i = l^i x``. Accepts a single vector or a stack of row vectors."""
    x = np.asarray(x)
    if x.shape[-1] != E.n:
        raise DimensionMismatch(f"state has dimension {x.shape[-1]}, system has {E.n}")
    return x @ E.left.T


def from_modal(E: EigenSystem, z) -> np.ndarray:
    """Inverse of :func:`modal_coordinates`: ``x = sum_i z_i r^i``."""
    z = np.asarray(z)
    if z.shape[-1] != E.n:
        raise DimensionMismatch(f"modal vector has dimension {z.shape[-1]}, system has {E.n}")
    return z @ E.right.T
