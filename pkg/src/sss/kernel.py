"""Gaussian kernel weights, local-quadratic derivative estimates and test statistics.

Offsets follow the image axes: ``dx`` runs along rows (first index) and
``dy`` along columns. A direction ``(u, v) = (cos t, sin t)`` therefore
points ``u`` down the rows and ``v`` across the columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .grid import GridError, ImageGrid, InteriorRegion, StatField, interior

__all__ = [
    "DerivativeEstimates",
    "KernelWeights",
    "LocalMoments",
    "curvature_weight",
    "direction_from_angle",
    "estimate_derivatives",
    "estimate_sigma",
    "kernel_weight",
    "moment_sum",
    "slope_weight",
    "standardized_stat_field",
    "support_radius",
    "weight_table",
]

MAD_NORMAL = 0.674489750196082  # Phi^{-1}(3/4)


def _check_h(h):
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")


def _check_direction(u, v):
    if abs(u * u + v * v - 1.0) >= 1e-12:
        raise ValueError(f"direction ({u}, {v}) is not a unit vector")


def direction_from_angle(theta: float) -> tuple[float, float]:
    return (math.cos(theta), math.sin(theta))


def support_radius(h: float, support_factor: float = 4.0) -> int:
    """Truncation radius ``ceil(support_factor * h)`` in pixels."""
    _check_h(h)
    return max(1, math.ceil(support_factor * h))


def kernel_weight(dx, dy, h):
    """Isotropic 2-D Gaussian density with standard deviation ``h``."""
    _check_h(h)
    return np.exp(-(np.square(dx) + np.square(dy)) / (2.0 * h * h)) / (2.0 * math.pi * h * h)


def slope_weight(dx, dy, u, v, h):
    """First-order directional weight ``(u dx + v dy) K_h(dx, dy)``."""
    _check_direction(u, v)
    return (u * np.asarray(dx) + v * np.asarray(dy)) * kernel_weight(dx, dy, h)


def curvature_weight(dx, dy, u, v, h):
    """Second-order directional weight ``((u dx + v dy)^2 - h^2) K_h(dx, dy)``."""
    _check_direction(u, v)
    proj = u * np.asarray(dx) + v * np.asarray(dy)
    return (proj * proj - h * h) * kernel_weight(dx, dy, h)


def _offsets(radius):
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    return d[:, None], d[None, :]


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Tabulated ``K_h`` over ``[-radius, radius]^2``; ``table[dx+r, dy+r]``."""

    h: float
    radius: int

    def __post_init__(self):
        _check_h(self.h)
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    @property
    def table(self) -> np.ndarray:
        return _kernel_table(float(self.h), int(self.radius))

    @property
    def taps(self) -> np.ndarray:
        """1-D factors ``d**k * k_h(d)`` for k = 0, 1, 2, shape ``(3, 2r+1)``."""
        return _taps(float(self.h), int(self.radius))


@lru_cache(maxsize=64)
def _kernel_table(h, radius):
    dx, dy = _offsets(radius)
    t = kernel_weight(dx, dy, h)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=64)
def _taps(h, radius):
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-d * d / (2.0 * h * h)) / math.sqrt(2.0 * math.pi * h * h)
    t = np.stack([k, d * k, d * d * k])
    t.setflags(write=False)
    return t


def moment_sum(m: int, k: int, h: float, radius: int) -> float:
    """Truncated lattice moment ``sum dx^m dy^k K_h(dx, dy)`` over ``|dx|, |dy| <= radius``."""
    if m not in range(5) or k not in range(5):
        raise ValueError(f"moment orders must lie in 0..4, got ({m}, {k})")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    _check_h(h)
    if m % 2 or k % 2:
        # the lattice is symmetric, so odd moments cancel term by term
        return 0.0
    dx, dy = _offsets(radius)
    return float(np.sum(dx**m * dy**k * _kernel_table(float(h), int(radius))))


def weight_table(h: float, radius: int, direction, order: str) -> np.ndarray:
    u, v = direction
    dx, dy = _offsets(radius)
    if order == "slope":
        return slope_weight(dx, dy, u, v, h)
    if order == "curvature":
        return curvature_weight(dx, dy, u, v, h)
    raise ValueError(f"unknown order {order!r}")


def _weight_norm(h, radius, direction, order, region):
    """``sqrt(sum W^2)`` per interior pixel over the part of the support inside the image.

    Returns a scalar when the whole support fits for every pixel.
    """
    w2 = weight_table(h, radius, direction, order) ** 2
    m = region.margin
    if m >= radius:
        return math.sqrt(float(w2.sum()))
    # summed-area table over the squared weights; each pixel's visible
    # support is a rectangle of offsets clipped by the image edges
    sat = np.zeros((2 * radius + 2, 2 * radius + 2))
    sat[1:, 1:] = w2.cumsum(0).cumsum(1)
    i = np.arange(m, m + region.g_rows)
    j = np.arange(m, m + region.g_cols)
    lo_r = radius - np.minimum(radius, i)
    hi_r = radius + np.minimum(radius, region.rows - 1 - i) + 1
    lo_c = radius - np.minimum(radius, j)
    hi_c = radius + np.minimum(radius, region.cols - 1 - j) + 1
    total = (
        sat[hi_r[:, None], hi_c[None, :]]
        - sat[lo_r[:, None], hi_c[None, :]]
        - sat[hi_r[:, None], lo_c[None, :]]
        + sat[lo_r[:, None], lo_c[None, :]]
    )
    return np.sqrt(total)


def _as_values(grid):
    return grid.values if isinstance(grid, ImageGrid) else np.asarray(grid, dtype=np.float64)


class LocalMoments:
    """Kernel-weighted data sums ``H_mk`` at every interior pixel for one bandwidth.

    Every slope and curvature statistic is a linear combination of these six
    fields, so one instance serves any number of directions.

    Parameters
    ----------
    grid : ImageGrid
    h : float
        Bandwidth in pixels.
    region : InteriorRegion, optional
        Defaults to ``interior(grid, h, support_factor)``.
    radius : int, optional
        Kernel truncation radius; defaults to ``ceil(support_factor * h)``.
    method : {"separable", "direct"}
        Two 1-D passes, or the full 2-D double sum (slow, used as an oracle).
    """

    def __init__(self, grid, h, region=None, radius=None, support_factor=4.0, method="separable"):
        _check_h(h)
        if not isinstance(grid, ImageGrid):
            grid = ImageGrid(grid)
        self.grid = grid
        self.h = float(h)
        self.region = region if region is not None else interior(grid, h, support_factor)
        if self.region.rows != grid.rows or self.region.cols != grid.cols:
            raise GridError("region was built for a different image size")
        self.radius = int(radius) if radius is not None else support_radius(h, support_factor)
        kw = KernelWeights(self.h, self.radius)
        m = self.region.margin
        if method == "separable":
            self.H = _kernels.separable_moments(grid.values, kw.taps, m, self.radius)
        elif method == "direct":
            self.H = _kernels.direct_moments(grid.values, kw.table, m, self.radius)
        else:
            raise ValueError(f"unknown method {method!r}")
        self.method = method

    def __getitem__(self, mk):
        return self.H[_kernels.MOMENT_ORDER.index(tuple(mk))]

    def numerator(self, direction, order):
        """``sum W * Y`` for the given direction and order."""
        u, v = direction
        _check_direction(u, v)
        if order == "slope":
            return u * self[1, 0] + v * self[0, 1]
        if order == "curvature":
            h2 = self.h * self.h
            return u * u * self[2, 0] + 2.0 * u * v * self[1, 1] + v * v * self[0, 2] - h2 * self[0, 0]
        raise ValueError(f"unknown order {order!r}")

    def weight_norm(self, direction, order):
        return _weight_norm(self.h, self.radius, direction, order, self.region)

    def stat(self, direction, order, sigma) -> StatField:
        if not sigma > 0:
            raise ValueError(
                f"sigma must be positive, got {sigma!r}; supply sigma explicitly "
                "(the estimate is zero for images without pixel-to-pixel variation)"
            )
        direction = (float(direction[0]), float(direction[1]))
        denom = self.weight_norm(direction, order)
        assert np.all(np.asarray(denom) > 0)
        stats = self.numerator(direction, order) / (sigma * denom)
        return StatField(self.region, direction, order, stats, float(sigma), self.h)

    def derivatives(self) -> DerivativeEstimates:
        h2 = self.h * self.h
        h4 = h2 * h2
        return DerivativeEstimates(
            a10=self[1, 0] / h2,
            a01=self[0, 1] / h2,
            a20=(self[2, 0] - self[0, 0] * h2) / (2.0 * h4),
            a11=self[1, 1] / (2.0 * h4),
            a02=(self[0, 2] - self[0, 0] * h2) / (2.0 * h4),
            region=self.region,
        )


@dataclass(frozen=True, eq=False)
class DerivativeEstimates:
    """Local-quadratic slope and Hessian estimates at each interior pixel.

    ``a11`` is the coefficient of ``2 dx dy`` in the local fit, i.e. the
    mixed partial derivative.
    """

    a10: np.ndarray
    a01: np.ndarray
    a20: np.ndarray
    a11: np.ndarray
    a02: np.ndarray
    region: InteriorRegion


def estimate_derivatives(grid, h, region=None, radius=None, method="separable") -> DerivativeEstimates:
    return LocalMoments(grid, h, region=region, radius=radius, method=method).derivatives()


def standardized_stat_field(grid, h, region, direction, order, sigma, radius=None, method="separable"):
    """Directional statistic divided by ``sigma * sqrt(sum W^2)``; unit variance under pure noise."""
    return LocalMoments(grid, h, region=region, radius=radius, method=method).stat(direction, order, sigma)


def estimate_sigma(grid) -> float:
    """Noise scale from horizontal first differences.

    ``median(|Y[i, j+1] - Y[i, j]|) / (sqrt(2) * 0.6745)``: a difference of
    two independent N(0, s^2) values has scale ``s * sqrt(2)``, and the
    median absolute value of a centred normal is 0.6745 of its scale.
    Smooth trends barely move the median.
    """
    values = _as_values(grid)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ValueError("need at least two columns to estimate sigma")
    diffs = np.abs(np.diff(values, axis=1))
    return float(np.median(diffs) / (math.sqrt(2.0) * MAD_NORMAL))
