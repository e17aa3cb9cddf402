"""Sub-fractional Brownian motion: covariance structure and exact sampling.

A sub-fractional Brownian motion with Hurst index H is the centred Gaussian
process S_t with S_0 = 0 and

    E[S_s S_t] = s^{2H} + t^{2H} - (|s - t|^{2H} + (s + t)^{2H}) / 2.

H = 1/2 recovers standard Brownian motion.  For H > 1/2 the increments are
positively correlated but, unlike fractional Brownian motion, non-stationary,
so circulant-embedding samplers do not apply.  Paths are drawn exactly on a
uniform grid of [0, 1] through a dense Cholesky factor of the covariance
matrix, which is cheap at the grid sizes used here (n up to a few thousand).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "FactorizationError",
    "TimeGrid",
    "SubFbmPath",
    "validate_hurst",
    "covariance",
    "increment_variance",
    "increment_bounds",
    "increment_covariance",
    "covariance_matrix",
    "cholesky_factor",
    "replicate_rng",
    "sample_paths",
]

# Jitter ladder for a Cholesky factorization that fails on a matrix that is
# PSD in exact arithmetic: delta * max(diag), delta escalating tenfold.
_JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)

_MASK64 = (1 << 64) - 1


class FactorizationError(RuntimeError):
    """Covariance matrix could not be factorized even with maximal jitter."""


def validate_hurst(h: float, *, allow_half: bool = True) -> float:
    """Check a Hurst parameter and return it as a float.

    The admissible range is [1/2, 1); h = 1/2 is the Brownian validation
    case and can be excluded with ``allow_half=False`` for operations whose
    kernel degenerates there.
    """
    h = float(h)
    if not np.isfinite(h) or h < 0.5 or h >= 1.0:
        raise ValueError(f"Hurst parameter must lie in [0.5, 1), got {h}")
    if not allow_half and h == 0.5:
        raise ValueError("Hurst parameter 0.5 is not admissible for this operation")
    return h


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t_i = i/n of the unit interval, i = 0..n."""

    n: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"grid needs a positive integer step count, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.arange(self.n + 1, dtype=float) / self.n
        pts.flags.writeable = False
        return pts

    @property
    def dt(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True)
class SubFbmPath:
    """Sampled sub-fBm values on a uniform grid, with the Hurst index used."""

    grid: TimeGrid
    values: np.ndarray
    hurst: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise ValueError(
                f"path needs {self.grid.n + 1} values for an n={self.grid.n} grid, "
                f"got shape {values.shape}"
            )
        if values[0] != 0.0:
            raise ValueError("sub-fBm paths start at zero")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "hurst", validate_hurst(self.hurst))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def _check_times(*times: np.ndarray) -> None:
    for t in times:
        if np.any(t < 0):
            raise ValueError("times must be nonnegative")


def covariance(s, t, h: float):
    """Covariance E[S_s S_t] of sub-fBm with Hurst index h.

    Accepts scalars or broadcastable arrays; returns a float for scalar input.
    """
    h = validate_hurst(h)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_times(s, t)
    two_h = 2.0 * h
    c = s**two_h + t**two_h - 0.5 * (np.abs(s - t) ** two_h + (s + t) ** two_h)
    return float(c) if c.ndim == 0 else c


def increment_variance(s, t, h: float):
    """Variance E|S_t - S_s|^2 for 0 <= s <= t.

    Equals covariance(t,t) + covariance(s,s) - 2 covariance(s,t), which
    expands to -2^{2H-1}(t^{2H} + s^{2H}) + (t+s)^{2H} + (t-s)^{2H}.
    """
    h = validate_hurst(h)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_times(s, t)
    if np.any(s > t):
        raise ValueError("increment_variance requires s <= t")
    two_h = 2.0 * h
    v = -(2.0 ** (two_h - 1.0)) * (t**two_h + s**two_h) + (t + s) ** two_h + (t - s) ** two_h
    return float(v) if v.ndim == 0 else v


def increment_bounds(s, t, h: float):
    """Sharp two-sided bounds on the increment variance over [s, t].

    Returns (lower, upper) = (min(2 - 2^{2H-1}, 1), max(...)) * (t - s)^{2H};
    increment_variance(s, t, h) always lies in [lower, upper].
    """
    h = validate_hurst(h)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_times(s, t)
    if np.any(s > t):
        raise ValueError("increment_bounds requires s <= t")
    two_h = 2.0 * h
    factor = 2.0 - 2.0 ** (two_h - 1.0)
    gap = (t - s) ** two_h
    lower = min(factor, 1.0) * gap
    upper = max(factor, 1.0) * gap
    if np.ndim(lower) == 0:
        return float(lower), float(upper)
    return lower, upper


def increment_covariance(u, v, s, t, h: float):
    """Covariance E[(S_t - S_s)(S_v - S_u)] of two increments.

    Arguments must satisfy 0 <= u <= v <= s <= t (non-overlapping intervals);
    the coinciding case (u, v) == (s, t) is also admitted and reduces to
    increment_variance(u, v, h).
    """
    h = validate_hurst(h)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_times(u, v, s, t)
    ordered = (u <= v) & (v <= s) & (s <= t)
    coincident = (u == s) & (v == t) & (u <= v)
    if not np.all(ordered | coincident):
        raise ValueError("increment_covariance requires u <= v <= s <= t")
    two_h = 2.0 * h
    c = 0.5 * (
        (t + u) ** two_h
        + np.abs(t - u) ** two_h
        + (s + v) ** two_h
        + np.abs(s - v) ** two_h
        - (t + v) ** two_h
        - np.abs(t - v) ** two_h
        - (s + u) ** two_h
        - np.abs(s - u) ** two_h
    )
    return float(c) if c.ndim == 0 else c


def covariance_matrix(grid: TimeGrid, h: float) -> np.ndarray:
    """Covariance matrix of (S_{t_1}, ..., S_{t_n}) on the grid (t_0 excluded)."""
    h = validate_hurst(h)
    t = grid.points[1:]
    return covariance(t[:, None], t[None, :], h)


def cholesky_factor(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor with a bounded diagonal-jitter fallback.

    Returns (L, jitter_used).  Jitter starts at 1e-12 * max(diag) and
    escalates tenfold up to 1e-8 * max(diag); beyond that the matrix is
    treated as genuinely non-PSD and FactorizationError is raised.
    """
    scale = float(np.max(np.diagonal(matrix)))
    for delta in _JITTER_LADDER:
        shifted = matrix if delta == 0.0 else matrix + (delta * scale) * np.eye(len(matrix))
        try:
            return np.linalg.cholesky(shifted), delta * scale
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        f"Cholesky failed for a {len(matrix)}x{len(matrix)} covariance matrix "
        f"even with jitter 1e-8 * max(diag) = {1e-8 * scale:g}"
    )


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent RNG stream for one replicate.

    Uses the counter-based Philox generator keyed by the 128-bit word
    (seed << 64) | replicate, so stream k depends only on (seed, k) and is
    identical regardless of evaluation order or parallelism.
    """
    key = ((int(seed) & _MASK64) << 64) | (int(replicate) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_paths(grid: TimeGrid, h: float, count: int, seed: int) -> list[SubFbmPath]:
    """Draw exact sub-fBm paths on the grid.

    Each path k is an independent draw of (S_{t_1}, ..., S_{t_n}) with the
    analytic covariance (to factorization accuracy), S_{t_0} = 0 prepended,
    generated from the replicate stream replicate_rng(seed, k).
    """
    h = validate_hurst(h)
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    factor, _ = cholesky_factor(covariance_matrix(grid, h))
    values = np.zeros((count, grid.n + 1))
    for k in range(count):
        z = replicate_rng(seed, k).standard_normal(grid.n)
        values[k, 1:] = factor @ z
    return [SubFbmPath(grid=grid, values=values[k], hurst=h) for k in range(count)]
