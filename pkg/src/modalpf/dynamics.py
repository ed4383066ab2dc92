"""Trajectories of polynomial fields and empirical nonlinear participation estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .eigensystem import EigenSystem
from .errors import NonFinite, RegionExceeded, StepUnderflow
from .normalform import NormalFormTransform, contraction_radius, evaluate_map
from .participation import orbit_mode_in_state
from .polynomial import PolynomialVectorField
from .sampling import ICKind, InitialConditionModel, Marginal, SampleStream

DEFAULT_DT = 1e-3
DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
STIFF_SPREAD = 100.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    x0: np.ndarray
    dt_stats: tuple[float, float]
    method: str

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True, eq=False)
class EmpiricalParticipation:
    values: np.ndarray
    epsilon: float
    samples: int
    stderr: np.ndarray


def _spread(f: PolynomialVectorField) -> tuple[float, float]:
    re = np.abs(np.linalg.eigvals(f.linear_part()).real)
    return float(re.min()), float(re.max())


def choose_method(f: PolynomialVectorField) -> str:
    lo, hi = _spread(f)
    if hi == 0:
        return "rk4"
    return "rk45" if lo == 0 or hi / lo > STIFF_SPREAD else "rk4"


def _decimation(f: PolynomialVectorField, t_end: float) -> int:
    lo, _ = _spread(f)
    return 1 if lo == 0 or t_end <= 10.0 / lo else 10


def rk4(f, x0: np.ndarray, t_end: float, dt: float, keep_every: int = 1):
    """Classical fixed-step Runge–Kutta; the step is adjusted to land on ``t_end``."""
    steps = t_end / dt
    nsteps = int(round(steps)) if abs(steps - round(steps)) < 1e-9 * max(1.0, steps) else math.ceil(steps)
    nsteps = max(nsteps, 1)
    h = t_end / nsteps
    x = np.array(x0)
    times, states = [0.0], [x.copy()]
    for j in range(1, nsteps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"state became non-finite at t = {j * h:.6g}")
        if j % keep_every == 0 or j == nsteps:
            times.append(j * h)
            states.append(x.copy())
    return np.array(times), np.array(states), (h, h)


def integrate(
    f: PolynomialVectorField,
    x0,
    t_end: float,
    dt: float = DEFAULT_DT,
    method: str | None = None,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    keep_every: int | None = None,
) -> Trajectory:
    """Integrate ``dx/dt = f(x)`` from ``x0`` over ``[0, t_end]``.

    ``method`` is ``"rk4"`` (fixed step ``dt``) or ``"rk45"`` (adaptive, via
    scipy); by default RK45 is used only when the real parts of the linear
    spectrum spread by more than a factor 100.
    """
    x0 = np.asarray(x0, dtype=complex if f.is_complex or np.iscomplexobj(x0) else float)
    if x0.shape != (f.n,):
        raise ValueError(f"x0 must have shape ({f.n},)")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    method = (method or choose_method(f)).lower()
    if keep_every is None:
        keep_every = _decimation(f, t_end)

    if method == "rk4":
        if dt <= 0:
            raise ValueError("dt must be positive")
        t, X, stats = rk4(f, x0, t_end, dt, keep_every)
        return Trajectory(t, X, x0, stats, "rk4")
    if method != "rk45":
        raise ValueError(f"unknown integration method {method!r}")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")

    sol = solve_ivp(lambda _t, x: f(x), (0.0, t_end), x0, method="RK45", rtol=rtol, atol=atol)
    if sol.status == -1:
        if "step size" in sol.message.lower():
            raise StepUnderflow(sol.message)
        raise NonFinite(sol.message)
    X = sol.y.T
    if not np.all(np.isfinite(X)):
        raise NonFinite("state became non-finite")
    steps = np.diff(sol.t)
    idx = np.arange(0, len(sol.t), keep_every)
    if idx[-1] != len(sol.t) - 1:
        idx = np.append(idx, len(sol.t) - 1)
    return Trajectory(sol.t[idx], X[idx], x0, (float(steps.min()), float(steps.max())), "rk45")


def verify_conjugacy(
    f: PolynomialVectorField,
    E: EigenSystem,
    nf: NormalFormTransform,
    x0,
    t_end: float,
    tol: float = 1e-6,
    *,
    dt: float = DEFAULT_DT,
    grid: int = 50,
) -> tuple[float, bool]:
    """Check that ``phi`` carries the nonlinear flow onto the normal-form flow.

    Returns ``max_t ||phi(L x(t)) - y(t)||`` over ``grid + 1`` equally spaced
    times and whether it is within ``tol``.  ``y(t) = e^{Lambda t} phi(L x0)``
    when the normal form is linear; otherwise ``y`` is integrated from the
    reduced field ``Lambda y + w(y)``.
    """
    x0 = np.asarray(x0, dtype=float)
    nsteps = max(grid, int(round(t_end / dt)))
    nsteps = grid * math.ceil(nsteps / grid)
    traj = integrate(f, x0, t_end, t_end / nsteps, "rk4", keep_every=nsteps // grid)
    zt = evaluate_map(nf.phi, traj.states @ E.left.T)
    y0 = evaluate_map(nf.phi, E.left @ x0)
    if nf.linearizes:
        ref = np.exp(np.outer(traj.times, nf.lambdas)) * y0
    else:
        reduced = PolynomialVectorField(
            nf.w.n, nf.truncation_order,
            {**{(s, tuple(int(j == s) for j in range(nf.w.n))): complex(lam)
                for s, lam in enumerate(nf.lambdas)}, **nf.w.terms},
        )
        ref = integrate(reduced, y0, t_end, t_end / nsteps, "rk4", keep_every=nsteps // grid).states
    resid = float(np.linalg.norm(zt - ref, axis=1).max())
    return resid, resid <= tol


def _max_abs_coordinate(icm: InitialConditionModel) -> float:
    if icm.kind is ICKind.UNIFORM_SPHERE:
        return icm.radius
    if icm.kind is ICKind.SYMMETRIC_PRODUCT:
        # Gaussian draws are unbounded; 6 sigma covers all but ~1e-9 of them
        return icm.scale * (6.0 if icm.marginal is Marginal.GAUSSIAN else 1.0)
    return max(icm.semi_axes)


def empirical_mode_in_state(
    f: PolynomialVectorField,
    E: EigenSystem,
    nf: NormalFormTransform,
    icm: InitialConditionModel | None = None,
    epsilon: float = 0.05,
    s: SampleStream | None = None,
    *,
    workers: int = 1,
) -> EmpiricalParticipation:
    """Average ``r^i_k phi_i(z0) / x_k(0)`` over ``x0 = epsilon * (draw from icm)``.

    The ratio is the contribution of the ``e^{lambda_i t}`` mode to ``x_k`` at
    ``t = 0`` once the flow is written in normal-form coordinates.  Draws are
    averaged over their sign orbits exactly as in
    :func:`modalpf.participation.mode_in_state_mc`.
    """
    icm = icm or InitialConditionModel.uniform_sphere(E.n)
    s = s or SampleStream()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not np.allclose(nf.lambdas, E.eigenvalues, rtol=0, atol=1e-9 * max(1.0, np.abs(E.eigenvalues).max())):
        raise ValueError("normal form was computed for a different spectrum")
    reach = epsilon * np.abs(E.left).sum(axis=1).max() * _max_abs_coordinate(icm)
    limit = contraction_radius(nf.phi)
    if reach > limit:
        raise RegionExceeded(
            f"initial conditions reach |z| = {reach:.3g}, beyond the map's validity radius {limit:.3g}"
        )
    L = E.left
    mean, err, _ = orbit_mode_in_state(
        lambda Y: evaluate_map(nf.phi, Y @ L.T), E, icm, s, scale=epsilon, workers=workers
    )
    return EmpiricalParticipation(mean, float(epsilon), s.count, err)
