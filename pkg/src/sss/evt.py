"""Gumbel-type thresholds for maxima of smoothed Gaussian statistic fields.

The maximum of a ``g x g`` field of unit-variance statistics satisfies
``P(max <= x/a_n + b_n) -> exp(-theta * exp(-x))`` with ``n = g**2``. The
extremal constant ``theta`` is replaced by its closed-form upper bound,
which can only raise the threshold.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from scipy import special

__all__ = [
    "ThresholdSpec",
    "critical_value",
    "make_threshold",
    "normal_cdf",
    "normal_cdf_inv",
    "norming_constants",
    "scale_constant",
    "theta_bound",
    "theta_bound_curvature",
    "theta_bound_slope",
]


def normal_cdf(z: float) -> float:
    """Standard normal CDF (``scipy.special.ndtr``, accurate in both tails)."""
    return float(special.ndtr(z))


def normal_cdf_inv(p: float) -> float:
    """Inverse standard normal CDF with one Newton step on :func:`normal_cdf`."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    z = float(special.ndtri(p))
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        z -= (normal_cdf(z) - p) / pdf
    return z


def norming_constants(n: float) -> tuple[float, float]:
    """``(a_n, b_n)`` for the maximum of ``n`` standard normals (natural logs)."""
    if not n >= 3:
        raise ValueError(f"n must be >= 3, got {n!r}")
    two_log = 2.0 * math.log(n)
    a = math.sqrt(two_log)
    b = a - 0.5 / a * (math.log(math.log(n)) + math.log(4.0 * math.pi))
    return a, b


def scale_constant(g: int, h: float) -> float:
    """``C = sqrt(ln g) / h`` tying the bandwidth to the field size."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    if not g >= 2:
        raise ValueError(f"g must be >= 2, got {g!r}")
    return math.sqrt(math.log(g)) / h


def theta_bound_slope(C: float) -> float:
    """Upper bound ``2 Phi(C) - 1`` on the extremal constant of a slope field."""
    if not C > 0:
        raise ValueError(f"C must be positive, got {C!r}")
    return 2.0 * normal_cdf(C) - 1.0


def theta_bound_curvature(C: float) -> float:
    """Upper bound ``2 Phi(sqrt(6) C / 2) - 1`` for a curvature field."""
    if not C > 0:
        raise ValueError(f"C must be positive, got {C!r}")
    return 2.0 * normal_cdf(math.sqrt(6.0) * C / 2.0) - 1.0


def theta_bound(order: str, C: float) -> float:
    if order == "slope":
        return theta_bound_slope(C)
    if order == "curvature":
        return theta_bound_curvature(C)
    raise ValueError(f"unknown order {order!r}")


def critical_value(
    alpha: float, N: int, g: int, theta: float, one_sided: bool = False
) -> tuple[float, float]:
    """Gumbel location ``x`` and threshold ``u`` for ``N`` two-sided field tests.

    Bonferroni over ``N`` fields and both tails requires
    ``2N exp(-theta e^{-x}) - (2N - 1) = 1 - alpha``, so
    ``x = -ln(-ln(1 - alpha/(2N)) / theta)`` and ``u = x / a + b`` with the
    norming constants of ``n = g**2``. With ``one_sided`` the tail budget is
    ``alpha / N`` instead.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta!r}")
    if not g >= 3:
        raise ValueError(f"g must be >= 3, got {g!r}")
    tails = N if one_sided else 2 * N
    x = -math.log(-math.log1p(-alpha / tails) / theta)
    a, b = norming_constants(g * g)
    return x, x / a + b


@dataclass(frozen=True)
class ThresholdSpec:
    """Fully resolved critical value, kept with everything needed to audit it.

    ``stat_threshold`` is what ``|T|`` is compared against: ``u_crit``
    normally, ``sqrt(2) * u_crit`` when the squared joint statistic is
    compared with ``2 u^2`` (``tau2u2``).
    """

    alpha: float
    n_directions: int
    order: str
    g: int
    h: float
    C: float
    theta_bound: float
    x_quantile: float
    u_crit: float
    g_rows: int | None = None
    g_cols: int | None = None
    g_from_nonsquare: bool = False
    one_sided: bool = False
    tau2u2: bool = False

    @property
    def stat_threshold(self) -> float:
        return math.sqrt(2.0) * self.u_crit if self.tau2u2 else self.u_crit

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["stat_threshold"] = self.stat_threshold
        return d


def make_threshold(
    alpha: float,
    n_directions: int,
    g: int,
    h: float,
    order: str,
    one_sided: bool = False,
    tau2u2: bool = False,
    g_rows: int | None = None,
    g_cols: int | None = None,
) -> ThresholdSpec:
    C = scale_constant(g, h)
    theta = theta_bound(order, C)
    x, u = critical_value(alpha, n_directions, g, theta, one_sided=one_sided)
    return ThresholdSpec(
        alpha=float(alpha),
        n_directions=int(n_directions),
        order=order,
        g=int(g),
        h=float(h),
        C=C,
        theta_bound=theta,
        x_quantile=x,
        u_crit=u,
        g_rows=g_rows,
        g_cols=g_cols,
        g_from_nonsquare=(g_rows is not None and g_cols is not None and g_rows != g_cols),
        one_sided=one_sided,
        tau2u2=tau2u2,
    )


def threshold_for_region(region, alpha, n_directions, h, order, **kw) -> ThresholdSpec:
    return make_threshold(
        alpha, n_directions, region.g, h, order, g_rows=region.g_rows, g_cols=region.g_cols, **kw
    )
