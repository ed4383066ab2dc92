"""Classic, averaging-based and state-in-mode participation factors.

Indexing is ``values[k, i]``: row ``k`` is a state, column ``i`` a mode.

The Monte-Carlo estimators average the defining ratios over sampled initial
states.  Those ratios have heavy (Cauchy-like) tails near ``x_k = 0`` and their
expectations exist only thanks to the symmetry of the initial-condition law, so
with ``antithetic=True`` every draw is replaced by the mean over its orbit under
the reflections that leave the law invariant.  Odd terms then cancel inside each
orbit instead of only in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .eigensystem import EigenSystem
from .errors import DegenerateSamples, ZeroLeftEigenvector
from .sampling import (
    ICKind,
    InitialConditionModel,
    Moments,
    SampleStream,
    check_dimension,
    draw_blocks,
    reduce_blocks,
    sign_orbit,
)

CLIP_TOL = 1e-6
MIN_MC_SAMPLES = 1000
MAX_CLIPPED_FRACTION = 0.5


class Kind(str, Enum):
    MODE_IN_STATE = "ModeInState"
    STATE_IN_MODE = "StateInMode"


class Method(str, Enum):
    CLASSIC_FORMULA = "ClassicFormula"
    CLOSED_FORM_SYMMETRIC = "ClosedFormSymmetric"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True, eq=False)
class ParticipationMatrix:
    values: np.ndarray
    kind: Kind
    method: Method
    stderr: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def pair_summed(self, E: EigenSystem) -> tuple[list[str], np.ndarray, np.ndarray | None]:
        """Combine the columns of each complex-conjugate mode pair.

        Returns 1-based mode labels (``"2+3"`` for a pair), the combined values
        and, for Monte-Carlo results, a conservative (summed) error bar.
        """
        labels, cols, errs = [], [], []
        for group in E.conjugate_pairs():
            labels.append("+".join(str(i + 1) for i in group))
            cols.append(self.values[:, list(group)].sum(axis=1))
            if self.stderr is not None:
                errs.append(self.stderr[:, list(group)].sum(axis=1))
        err = np.stack(errs, axis=1) if errs else None
        return labels, np.stack(cols, axis=1), err


# ---- closed forms ------------------------------------------------------------------


def classic_pf(E: EigenSystem) -> ParticipationMatrix:
    """``p_ki = l^i_k r^i_k``."""
    values = E.right * E.left.T
    return ParticipationMatrix(values, Kind.MODE_IN_STATE, Method.CLASSIC_FORMULA)


def mode_in_state_symmetric(E: EigenSystem) -> ParticipationMatrix:
    """Averaged mode-in-state factors for any sign-symmetric initial law.

    The average of ``(l^i x) r^i_k / x_k`` collapses to the classic product
    because every cross term ``x_j / x_k`` is odd under the flip of ``x_j``.
    """
    values = E.right * E.left.T
    return ParticipationMatrix(values, Kind.MODE_IN_STATE, Method.CLOSED_FORM_SYMMETRIC)


def modal_ratio_expectations(E: EigenSystem, *, tol: float = 1e-14) -> np.ndarray:
    """``C[i, j] = E[z_j / z_i]`` for ``x`` uniform on a sphere (``z = L x``).

    For a real left eigenvector this is ``l^j (l^i)^T / l^i (l^i)^T``.  For a
    complex one, ``z_i`` depends on ``x`` only through its projection ``y`` onto
    ``span(Re l^i, Im l^i)``; the ratio is reduced by conditioning on ``y`` and
    ``E[y y^T / |y|^2] = G^{1/2} / tr G^{1/2}`` (``G`` the Gram matrix), which
    holds for any centred Gaussian in the plane.  The sphere gives the same
    values because the ratio is homogeneous of degree zero.
    """
    n = E.n
    L = E.left
    C = np.empty((n, n), dtype=complex)
    for i in range(n):
        if E.eigenvalues[i].imag == 0:
            b = L[i].real
            bb = float(b @ b)
            if bb <= tol:
                raise ZeroLeftEigenvector(f"left eigenvector {i + 1} has l l^T = {bb:.3e}")
            C[i] = (L @ b) / bb
            continue
        B = np.vstack([L[i].real, L[i].imag])
        G = B @ B.T
        if np.linalg.det(G) <= tol * np.trace(G) ** 2:
            raise ZeroLeftEigenvector(
                f"real and imaginary parts of left eigenvector {i + 1} are (nearly) parallel"
            )
        w, U = np.linalg.eigh(G)
        S = (U * np.sqrt(w)) @ U.T
        M = S / np.trace(S)
        # E[(a.x) / (u + i v)] with (u, v) = B x and a.x regressed onto (u, v)
        coef = np.linalg.solve(G, B @ L.T)  # shape (2, n)
        C[i] = coef[0] * (M[0, 0] - 1j * M[0, 1]) + coef[1] * (M[1, 0] - 1j * M[1, 1])
        C[i, i] = 1.0
    return C


def state_in_mode_closed(E: EigenSystem) -> ParticipationMatrix:
    """State-in-mode factors under a uniform-sphere initial law.

    ``pi_ki = l^i_k r^i_k + sum_{j != i} l^i_k r^j_k E[z_j / z_i]``; see
    :func:`modal_ratio_expectations` for the cross-ratio expectations.
    """
    C = modal_ratio_expectations(E)
    L, R = E.left, E.right
    n = E.n
    values = np.empty((n, n), dtype=complex)
    for i in range(n):
        cross = sum((R[:, j] * C[i, j] for j in range(n) if j != i), np.zeros(n, dtype=complex))
        values[:, i] = L[i] * R[:, i] + L[i] * cross
    return ParticipationMatrix(values, Kind.STATE_IN_MODE, Method.CLOSED_FORM_SYMMETRIC)


# ---- Monte-Carlo estimators --------------------------------------------------------


def orbit_mode_in_state(
    amplitudes: Callable[[np.ndarray], np.ndarray],
    E: EigenSystem,
    icm: InitialConditionModel,
    s: SampleStream,
    *,
    scale: float = 1.0,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Estimate ``E[r^i_k a_i(x) / x_k]`` with sign-orbit averaging.

    ``amplitudes(X)`` maps a stack of states (rows) to the modal amplitudes whose
    ``i``-th column multiplies ``r^i``; ``l^i x`` gives the linear estimator.
    Initial states are ``scale`` times draws from ``icm``.

    Returns mean, stderr (real and imaginary error bars packed as a complex
    array) and the number of orbits drawn.
    """
    n = E.n
    check_dimension(icm, n)
    if s.count < MIN_MC_SAMPLES:
        raise ValueError(f"Monte-Carlo estimators need at least {MIN_MC_SAMPLES} samples")
    signs = sign_orbit(n) if s.antithetic else np.ones((1, n))
    orbits = math.ceil(s.count / len(signs))
    blocks = draw_blocks(icm, s.seed, orbits)
    thresh = CLIP_TOL * scale * icm.axis_scale()
    R = E.right

    def per_block(_b: int, X: np.ndarray) -> Moments:
        X = scale * X
        acc = np.zeros((len(X), n, n), dtype=complex)
        for sg in signs:
            Y = X * sg
            a = amplitudes(Y)  # (B, n_modes)
            with np.errstate(divide="ignore", invalid="ignore"):
                acc += R[None, :, :] * a[:, None, :] / Y[:, :, None]
        acc /= len(signs)
        # |x_k| is shared by the whole orbit, so clipping discards entire orbits
        keep = np.abs(X) >= thresh
        return Moments.of(acc, keep[:, :, None])

    mom = reduce_blocks(per_block, blocks, workers)
    clipped = 1.0 - mom.count[:, 0] / orbits
    if np.any(clipped > MAX_CLIPPED_FRACTION):
        k = int(np.argmax(clipped))
        raise DegenerateSamples(f"{clipped[k]:.0%} of samples clipped for state {k + 1}")
    return mom.mean, mom.stderr(), orbits


def mode_in_state_mc(
    E: EigenSystem,
    icm: InitialConditionModel | None = None,
    s: SampleStream | None = None,
    *,
    workers: int = 1,
) -> ParticipationMatrix:
    """Sample-mean estimate of ``E[(l^i x) r^i_k / x_k]``."""
    icm = icm or InitialConditionModel.uniform_sphere(E.n)
    s = s or SampleStream()
    L = E.left
    mean, err, orbits = orbit_mode_in_state(lambda Y: Y @ L.T, E, icm, s, workers=workers)
    prov = {"model": icm.kind.value, "seed": s.seed, "count": s.count, "orbits": orbits,
            "antithetic": s.antithetic}
    return ParticipationMatrix(mean, Kind.MODE_IN_STATE, Method.MONTE_CARLO, err, prov)


def _plane_projector(l: np.ndarray, real: bool) -> np.ndarray:
    B = np.atleast_2d(l.real) if real else np.vstack([l.real, l.imag])
    Q, _ = np.linalg.qr(B.T)
    return Q @ Q.T


def state_in_mode_mc(
    E: EigenSystem,
    icm: InitialConditionModel | None = None,
    s: SampleStream | None = None,
    *,
    workers: int = 1,
) -> ParticipationMatrix:
    """Sample-mean estimate of ``E[l^i_k x_k / z_i]`` on a uniform sphere.

    With ``antithetic`` each draw ``x`` is paired with ``H_i x``, the orthogonal
    reflection that flips the sign of ``z_i`` (it negates the component of
    ``x`` in the plane spanned by ``Re l^i`` and ``Im l^i``).  ``H_i`` preserves
    the sphere, and the part of the ratio that is odd in the orthogonal
    complement cancels inside the pair.
    """
    n = E.n
    icm = icm or InitialConditionModel.uniform_sphere(n)
    s = s or SampleStream()
    check_dimension(icm, n)
    if icm.kind is not ICKind.UNIFORM_SPHERE:
        raise ValueError("state-in-mode estimation is defined for the uniform-sphere model only")
    if s.count < MIN_MC_SAMPLES:
        raise ValueError(f"Monte-Carlo estimators need at least {MIN_MC_SAMPLES} samples")
    L = E.left
    reflections = [
        np.eye(n) - 2.0 * _plane_projector(L[i], E.eigenvalues[i].imag == 0) for i in range(n)
    ]
    per_draw = 2 if s.antithetic else 1
    draws = math.ceil(s.count / per_draw)
    blocks = draw_blocks(icm, s.seed, draws)
    thresh = CLIP_TOL * icm.radius * np.linalg.norm(L, axis=1)

    def per_block(_b: int, X: np.ndarray) -> Moments:
        Z = X @ L.T
        with np.errstate(divide="ignore", invalid="ignore"):
            acc = L.T[None, :, :] * X[:, :, None] / Z[:, None, :]
            if s.antithetic:
                for i, H in enumerate(reflections):
                    Y = X @ H.T
                    zi = Y @ L[i]
                    acc[:, :, i] += L[i][None, :] * Y / zi[:, None]
                acc /= 2.0
        keep = np.abs(Z) >= thresh
        return Moments.of(acc, keep[:, None, :])

    mom = reduce_blocks(per_block, blocks, workers)
    clipped = 1.0 - mom.count[0, :] / draws
    if np.any(clipped > MAX_CLIPPED_FRACTION):
        i = int(np.argmax(clipped))
        raise DegenerateSamples(f"{clipped[i]:.0%} of samples clipped for mode {i + 1}")
    prov = {"model": icm.kind.value, "seed": s.seed, "count": s.count, "draws": draws,
            "antithetic": s.antithetic}
    return ParticipationMatrix(mom.mean, Kind.STATE_IN_MODE, Method.MONTE_CARLO, mom.stderr(), prov)
