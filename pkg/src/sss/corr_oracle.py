"""Closed-form autocorrelations of the standardized statistic fields.

These are the continuum limits of the lag correlation of the slope and
curvature statistics computed on white noise, together with the 1-D
Gaussian moment integrals from which they are assembled. They serve as
independent checks of the lattice computations in :mod:`sss.kernel`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .kernel import _check_direction, weight_table

__all__ = [
    "correlation_table",
    "cross_direction_corr_zero",
    "empirical_lag_corr",
    "f_moment",
    "f_moment_quadrature",
    "rho",
    "rho_curvature",
    "rho_slope",
]


def rho_slope(i, j, u, v, h):
    """Limit correlation of slope statistics at lag ``(i, j)`` in direction ``(u, v)``."""
    _check_direction(u, v)
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    p = i * u + j * v
    return (1.0 - p * p / (2.0 * h * h)) * math.exp(-(i * i + j * j) / (4.0 * h * h))


def rho_curvature(i, j, u, v, h):
    """Limit correlation of curvature statistics at lag ``(i, j)``."""
    _check_direction(u, v)
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    p2 = (i * u + j * v) ** 2
    h2 = h * h
    return (1.0 - p2 / h2 + p2 * p2 / (12.0 * h2 * h2)) * math.exp(-(i * i + j * j) / (4.0 * h2))


def rho(order, i, j, u, v, h):
    if order == "slope":
        return rho_slope(i, j, u, v, h)
    if order == "curvature":
        return rho_curvature(i, j, u, v, h)
    raise ValueError(f"unknown order {order!r}")


def f_moment(i: float, k: int, h: float) -> float:
    r"""Closed form of :math:`\frac{1}{2\pi h^2}\int x^k e^{-[(x-i)^2 + x^2]/(2h^2)}\,dx`."""
    if k not in range(5):
        raise ValueError(f"k must lie in 0..4, got {k!r}")
    f0 = math.exp(-i * i / (4.0 * h * h)) / (2.0 * math.sqrt(math.pi * h * h))
    h2 = h * h
    factor = (
        1.0,
        i / 2.0,
        h2 / 2.0 + i * i / 4.0,
        3.0 * i * h2 / 4.0 + i**3 / 8.0,
        3.0 * h2 * h2 / 4.0 + 3.0 * i * i * h2 / 4.0 + i**4 / 16.0,
    )[k]
    return factor * f0


def f_moment_quadrature(i: float, k: int, h: float, epsabs: float = 1e-12) -> float:
    """Adaptive Gauss-Kronrod evaluation of the integral behind :func:`f_moment`."""

    def integrand(x):
        return x**k * math.exp(-((x - i) ** 2 + x * x) / (2.0 * h * h)) / (2.0 * math.pi * h * h)

    centre = i / 2.0
    val, _ = integrate.quad(
        integrand, centre - 12.0 * h, centre + 12.0 * h, epsabs=epsabs, epsrel=1e-13, limit=200
    )
    return val


def cross_direction_corr_zero(h: float, radius: int | None = None) -> float:
    """Correlation between the 0 and 90 degree slope statistics at one pixel.

    On a symmetric lattice ``sum W0 * W90 = sum dx dy K^2`` cancels exactly.
    """
    if radius is None:
        radius = math.ceil(4 * h)
    w0 = weight_table(h, radius, (1.0, 0.0), "slope")
    w90 = weight_table(h, radius, (0.0, 1.0), "slope")
    return float(np.sum(w0 * w90) / math.sqrt(np.sum(w0 * w0) * np.sum(w90 * w90)))


def empirical_lag_corr(field: np.ndarray, i: int, j: int) -> float:
    """Plug-in (1/n) correlation between ``field[l, k]`` and ``field[l+i, k+j]``."""
    f = np.asarray(field, dtype=np.float64)
    n_r, n_c = f.shape
    if abs(i) >= n_r or abs(j) >= n_c:
        raise ValueError(f"lag ({i}, {j}) does not fit a {n_r}x{n_c} field")
    ra, rb = (slice(0, n_r - i), slice(i, n_r)) if i >= 0 else (slice(-i, n_r), slice(0, n_r + i))
    ca, cb = (slice(0, n_c - j), slice(j, n_c)) if j >= 0 else (slice(-j, n_c), slice(0, n_c + j))
    a = f[ra, ca]
    b = f[rb, cb]
    a = a - a.mean()
    b = b - b.mean()
    return float(np.mean(a * b) / math.sqrt(np.mean(a * a) * np.mean(b * b)))


DEFAULT_LAGS = ((1, 0), (0, 1), (1, 1), (2, 0))
DEFAULT_ANGLES_DEG = (0.0, 90.0, 45.0)


def correlation_table(
    size: int = 400,
    bandwidths=(4.0, 8.0),
    lags=DEFAULT_LAGS,
    angles_deg=DEFAULT_ANGLES_DEG,
    orders=("slope", "curvature"),
    seed: int = 0,
    noise=None,
) -> list[dict]:
    """Analytic versus empirical lag correlations on one white-noise field."""
    from .grid import ImageGrid
    from .kernel import LocalMoments, direction_from_angle
    from .sim import generate_noise

    grid = noise if noise is not None else generate_noise(size, size, seed)
    if not isinstance(grid, ImageGrid):
        grid = ImageGrid(grid)
    rows = []
    for h in bandwidths:
        lm = LocalMoments(grid, h)
        for order in orders:
            for deg in angles_deg:
                u, v = direction_from_angle(math.radians(deg))
                stats = lm.stat((u, v), order, 1.0).stats
                for i, j in lags:
                    analytic = rho(order, i, j, u, v, h)
                    empirical = empirical_lag_corr(stats, i, j)
                    rows.append(
                        dict(
                            h=float(h),
                            order=order,
                            angle_deg=float(deg),
                            lag_i=int(i),
                            lag_j=int(j),
                            analytic=analytic,
                            empirical=empirical,
                            abs_diff=abs(analytic - empirical),
                        )
                    )
    return rows
