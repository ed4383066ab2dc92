"""Symmetric initial-condition models and deterministic, block-structured sampling."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch

BLOCK_SIZE = 4096


class ICKind(str, Enum):
    UNIFORM_SPHERE = "uniform_sphere"
    SYMMETRIC_PRODUCT = "symmetric_product"
    SYMMETRIC_SET = "symmetric_set"


class Marginal(str, Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


@dataclass(frozen=True)
class InitialConditionModel:
    """A distribution of initial states symmetric under each coordinate sign flip.

    Build with :meth:`uniform_sphere`, :meth:`symmetric_product` or
    :meth:`symmetric_set` rather than directly.
    """

    kind: ICKind
    dimension: int
    radius: float = 1.0
    marginal: Marginal | None = None
    scale: float = 1.0
    shape: str | None = None
    semi_axes: tuple[float, ...] = field(default_factory=tuple)

    @classmethod
    def uniform_sphere(cls, dimension: int, radius: float = 1.0) -> "InitialConditionModel":
        """Uniform law on the sphere ``||x|| = radius`` (a surface, not a ball)."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls(ICKind.UNIFORM_SPHERE, int(dimension), radius=float(radius))

    @classmethod
    def symmetric_product(cls, dimension: int, marginal: str | Marginal, scale: float = 1.0):
        """Independent coordinates with a common zero-symmetric marginal.

        ``scale`` is the half-width ``a`` for uniform and Rademacher marginals and
        the standard deviation for the Gaussian one.
        """
        if scale <= 0:
            raise ValueError("scale must be positive")
        return cls(ICKind.SYMMETRIC_PRODUCT, int(dimension), marginal=Marginal(marginal), scale=float(scale))

    @classmethod
    def symmetric_set(cls, shape: str, semi_axes: Sequence[float]) -> "InitialConditionModel":
        """Uniform law on an axis-aligned box or solid ellipsoid centred at 0."""
        if shape not in ("box", "ellipsoid"):
            raise ValueError(f"unknown set shape {shape!r}")
        axes = tuple(float(a) for a in semi_axes)
        if not axes or min(axes) <= 0:
            raise ValueError("semi-axes must be positive")
        return cls(ICKind.SYMMETRIC_SET, len(axes), shape=shape, semi_axes=axes)

    def axis_scale(self) -> np.ndarray:
        """Typical magnitude per coordinate, used to scale denominator clipping."""
        if self.kind is ICKind.UNIFORM_SPHERE:
            return np.full(self.dimension, self.radius)
        if self.kind is ICKind.SYMMETRIC_PRODUCT:
            return np.full(self.dimension, self.scale)
        return np.asarray(self.semi_axes)

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        n = self.dimension
        if self.kind is ICKind.UNIFORM_SPHERE:
            g = rng.standard_normal((count, n))
            return self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)
        if self.kind is ICKind.SYMMETRIC_PRODUCT:
            a = self.scale
            if self.marginal is Marginal.UNIFORM:
                return rng.uniform(-a, a, (count, n))
            if self.marginal is Marginal.GAUSSIAN:
                return a * rng.standard_normal((count, n))
            return a * rng.choice(np.array([-1.0, 1.0]), size=(count, n))
        axes = np.asarray(self.semi_axes)
        if self.shape == "box":
            return rng.uniform(-1.0, 1.0, (count, n)) * axes
        g = rng.standard_normal((count, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / n)
        return g * u * axes


@dataclass(frozen=True)
class SampleStream:
    """Seed, total sample budget, and whether sign-reflected partners are used."""

    seed: int = 0
    count: int = 100_000
    antithetic: bool = True

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be positive")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), block]))


def block_sizes(total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(total, block_size)
    return [block_size] * full + ([rest] if rest else [])


def draw_blocks(icm: InitialConditionModel, seed: int, total: int) -> list[np.ndarray]:
    """Base draws split into blocks; block ``b`` depends only on ``(seed, b)``."""
    return [icm.draw(block_rng(seed, b), m) for b, m in enumerate(block_sizes(total))]


def sample(icm: InitialConditionModel, s: SampleStream) -> np.ndarray:
    """Return ``s.count`` initial conditions as rows, deterministic in ``s.seed``.

    With ``antithetic`` every draw is followed by its negation, so the count is
    rounded up to an even number and the sample multiset is closed under ``x -> -x``.
    """
    if not s.antithetic:
        return np.concatenate(draw_blocks(icm, s.seed, s.count))
    base = np.concatenate(draw_blocks(icm, s.seed, math.ceil(s.count / 2)))
    out = np.empty((2 * len(base), icm.dimension))
    out[0::2] = base
    out[1::2] = -base
    return out


def sign_orbit(n: int) -> np.ndarray:
    """All ``2**n`` diagonal sign patterns, identity first."""
    grid = np.array(np.meshgrid(*([[1.0, -1.0]] * n), indexing="ij")).reshape(n, -1).T
    return grid


# ---- block reduction -------------------------------------------------------------


@dataclass
class Moments:
    """Count, mean and centred second moments of complex samples (real/imag tracked apart)."""

    count: np.ndarray
    mean: np.ndarray
    m2_re: np.ndarray
    m2_im: np.ndarray

    @classmethod
    def of(cls, values: np.ndarray, mask: np.ndarray) -> "Moments":
        """Moments over axis 0 of ``values`` restricted to rows where ``mask`` holds.

        ``mask`` broadcasts against ``values``.
        """
        w = np.broadcast_to(mask, values.shape).astype(float)
        cnt = w.sum(axis=0)
        safe = np.where(cnt > 0, cnt, 1.0)
        v = np.where(w > 0, values, 0.0)
        mean = v.sum(axis=0) / safe
        d = np.where(w > 0, values - mean, 0.0)
        return cls(cnt, mean, (d.real**2).sum(axis=0), (d.imag**2).sum(axis=0))

    def merge(self, other: "Moments") -> "Moments":
        n = self.count + other.count
        safe = np.where(n > 0, n, 1.0)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / safe
        corr = self.count * other.count / safe
        return Moments(
            n,
            mean,
            self.m2_re + other.m2_re + delta.real**2 * corr,
            self.m2_im + other.m2_im + delta.imag**2 * corr,
        )

    def stderr(self) -> np.ndarray:
        n = self.count
        denom = np.where(n > 1, n * (n - 1), np.inf)
        return np.sqrt(self.m2_re / denom) + 1j * np.sqrt(self.m2_im / denom)


def reduce_blocks(
    fn: Callable[[int, np.ndarray], Moments], blocks: list[np.ndarray], workers: int = 1
) -> Moments:
    """Apply ``fn`` per block (possibly in threads) and merge in block order.

    The merge order is fixed, so results do not depend on ``workers``.
    """
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, range(len(blocks)), blocks))
    else:
        parts = [fn(b, X) for b, X in enumerate(blocks)]
    acc = parts[0]
    for p in parts[1:]:
        acc = acc.merge(p)
    return acc


def check_dimension(icm: InitialConditionModel, n: int) -> None:
    if icm.dimension != n:
        raise DimensionMismatch(f"initial-condition model has dimension {icm.dimension}, system has {n}")
