"""Joint slope significance, directional curvature significance and streamlines."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .evt import ThresholdSpec, threshold_for_region
from .grid import ImageGrid, InteriorRegion, interior
from .kernel import LocalMoments, direction_from_angle, estimate_sigma

__all__ = [
    "ANGLE_PRESETS",
    "Category",
    "CurvatureResult",
    "SlopeResult",
    "Streamline",
    "classify_sign_array",
    "classify_signs",
    "curvature_analysis",
    "slope_analysis",
    "trace_streamlines",
]

SLOPE_DIRECTIONS = ((1.0, 0.0), (0.0, 1.0))

ANGLE_PRESETS = {
    "six": tuple(k * math.pi / 6 for k in range(6)),
    "table4": (-math.pi / 6, -math.pi / 12, 0.0, math.pi / 12, math.pi / 6, math.pi / 4),
}


class Category(enum.IntEnum):
    NONE = 0
    PEAK = 1
    HOLE = 2
    SADDLE = 3
    RIDGE = 4
    VALLEY = 5

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True, eq=False)
class SlopeResult:
    """Outcome of the joint test over the row and column directions.

    ``R`` is the pixelwise maximum of the two squared statistics and
    ``gradient`` holds the slope estimates ``(a10, a01)`` used for
    streamlines.
    """

    region: InteriorRegion
    h: float
    sigma: float
    R: np.ndarray
    significant: np.ndarray
    gradient: tuple[np.ndarray, np.ndarray]
    threshold: ThresholdSpec
    stats: tuple[np.ndarray, np.ndarray]

    @property
    def cutoff(self) -> float:
        """Value ``R`` must reach: ``u^2``, or ``2 u^2`` in compatibility mode."""
        return self.threshold.stat_threshold**2

    @property
    def n_significant(self) -> int:
        return int(self.significant.sum())


@dataclass(frozen=True, eq=False)
class CurvatureResult:
    region: InteriorRegion
    h: float
    sigma: float
    angles: tuple[float, ...]
    stats: np.ndarray  # (n_angles, g_rows, g_cols)
    signs: np.ndarray  # int8, same shape, values in {-1, 0, 1}
    category: np.ndarray  # uint8 Category codes, (g_rows, g_cols)
    threshold: ThresholdSpec

    def counts(self) -> dict[str, int]:
        return {c.label: int(np.count_nonzero(self.category == c)) for c in Category}

    @property
    def n_significant(self) -> int:
        return int(np.count_nonzero(self.category))


@dataclass(frozen=True, eq=False)
class Streamline:
    points: np.ndarray  # (n, 2) image (row, col) positions
    terminated_by: str


def classify_signs(signs) -> Category:
    """Curvature class from per-angle significance signs.

    All negative: peak. All positive: hole. Both signs present: saddle.
    Negatives plus at least one insignificant angle: ridge; likewise
    positives: valley. Nothing significant: none.
    """
    s = np.asarray(signs)
    if s.size == 0:
        raise ValueError("need at least one angle")
    return Category(int(classify_sign_array(s.reshape(-1, 1))[0]))


def classify_sign_array(signs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`classify_signs` over trailing pixel axes."""
    s = np.asarray(signs)
    n = s.shape[0]
    pos = np.count_nonzero(s > 0, axis=0)
    neg = np.count_nonzero(s < 0, axis=0)
    out = np.zeros(s.shape[1:], dtype=np.uint8)
    out[(neg > 0) & (pos == 0)] = Category.RIDGE
    out[(pos > 0) & (neg == 0)] = Category.VALLEY
    out[neg == n] = Category.PEAK
    out[pos == n] = Category.HOLE
    out[(pos > 0) & (neg > 0)] = Category.SADDLE
    return out


def _prepare(grid, h, region, margin, support_factor, sigma, moments):
    if not isinstance(grid, ImageGrid):
        grid = ImageGrid(grid)
    if moments is not None:
        region = moments.region
    elif region is None:
        region = interior(grid, h, support_factor, margin=margin)
    if sigma is None:
        sigma = estimate_sigma(grid)
    if not sigma > 0:
        raise ValueError(
            f"sigma must be positive, got {sigma!r}; the image has no pixel-to-pixel "
            "variation to estimate it from, so supply sigma explicitly"
        )
    if moments is None:
        moments = LocalMoments(grid, h, region=region, support_factor=support_factor)
    return grid, region, float(sigma), moments


def slope_analysis(
    grid,
    h: float,
    alpha: float = 0.05,
    sigma: float | None = None,
    *,
    region: InteriorRegion | None = None,
    margin: int | None = None,
    support_factor: float = 4.0,
    tau2u2: bool = False,
    moments: LocalMoments | None = None,
) -> SlopeResult:
    """Joint significance of slopes along the row and column axes.

    ``sigma=None`` estimates the noise scale with
    :func:`sss.kernel.estimate_sigma`.
    """
    grid, region, sigma, lm = _prepare(grid, h, region, margin, support_factor, sigma, moments)
    thr = threshold_for_region(region, alpha, len(SLOPE_DIRECTIONS), h, "slope", tau2u2=tau2u2)
    t0 = lm.stat(SLOPE_DIRECTIONS[0], "slope", sigma).stats
    t90 = lm.stat(SLOPE_DIRECTIONS[1], "slope", sigma).stats
    R = np.maximum(t0 * t0, t90 * t90)
    cutoff = thr.stat_threshold**2
    der = lm.derivatives()
    return SlopeResult(
        region=region,
        h=float(h),
        sigma=sigma,
        R=R,
        significant=R >= cutoff,
        gradient=(der.a10, der.a01),
        threshold=thr,
        stats=(t0, t90),
    )


def _check_angles(angles):
    angles = tuple(float(a) for a in angles)
    if not angles:
        raise ValueError("need at least one angle")
    reduced = [a % math.pi for a in angles]
    for p in range(len(reduced)):
        for q in range(p):
            d = abs(reduced[p] - reduced[q])
            if min(d, math.pi - d) < 1e-9:
                raise ValueError(
                    f"angles {angles[q]} and {angles[p]} coincide modulo pi and give identical tests"
                )
    return angles


def curvature_analysis(
    grid,
    h: float,
    alpha: float = 0.05,
    sigma: float | None = None,
    angles=ANGLE_PRESETS["six"],
    *,
    region: InteriorRegion | None = None,
    margin: int | None = None,
    support_factor: float = 4.0,
    one_sided: bool = False,
    moments: LocalMoments | None = None,
) -> CurvatureResult:
    """Directional second-derivative tests over ``angles`` and per-pixel classification."""
    angles = _check_angles(angles)
    grid, region, sigma, lm = _prepare(grid, h, region, margin, support_factor, sigma, moments)
    thr = threshold_for_region(region, alpha, len(angles), h, "curvature", one_sided=one_sided)
    u = thr.stat_threshold
    stats = np.stack([lm.stat(direction_from_angle(t), "curvature", sigma).stats for t in angles])
    signs = np.zeros(stats.shape, dtype=np.int8)
    signs[stats >= u] = 1
    signs[stats <= -u] = -1
    return CurvatureResult(
        region=region,
        h=float(h),
        sigma=sigma,
        angles=angles,
        stats=stats,
        signs=signs,
        category=classify_sign_array(signs),
        threshold=thr,
    )


def trace_streamlines(
    result: SlopeResult, seed_stride: int = 4, step: float = 0.5, max_steps: int = 400
) -> list[Streamline]:
    """Uphill gradient curves confined to the jointly significant pixels.

    Seeds sit on a ``seed_stride`` lattice of significant interior pixels.
    Each line is integrated with fixed-step RK4 on the bilinearly
    interpolated, normalized gradient and stops when it leaves the region,
    reaches a non-significant pixel, stalls, or hits ``max_steps``. Lines
    that never move are dropped.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    if seed_stride < 1:
        raise ValueError(f"seed_stride must be >= 1, got {seed_stride!r}")
    mask = result.significant
    grad_r, grad_c = result.gradient
    m = result.region.margin
    seeds = [
        (r, c)
        for r in range(0, mask.shape[0], seed_stride)
        for c in range(0, mask.shape[1], seed_stride)
        if mask[r, c]
    ]
    lines = []
    for pts, reason in _kernels.trace_many(grad_r, grad_c, mask, seeds, step, max_steps):
        if len(pts) >= 2:
            lines.append(Streamline(points=pts + m, terminated_by=reason))
    return lines
