"""Monte-Carlo harness: null-field Type-I experiments and bump-phantom power runs.

Replicate ``r`` draws its noise from a Philox stream keyed by
``SeedSequence(master_seed, spawn_key=(r,))``, so results do not depend on
how replicates are scheduled across workers. Normals are produced by the
inverse CDF of 53-bit uniforms taken from the raw counter output.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import math
import multiprocessing
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats

from .evt import ThresholdSpec, threshold_for_region
from .grid import ImageGrid, interior
from .inference import ANGLE_PRESETS, Category, curvature_analysis
from .kernel import LocalMoments, direction_from_angle, estimate_sigma

__all__ = [
    "Bump",
    "PowerConfig",
    "SimCell",
    "SimConfig",
    "SimResult",
    "clopper_pearson",
    "generate_noise",
    "generate_phantom",
    "power_experiment",
    "replicate_seed",
    "type1_experiment",
]

MODES = ("slope_per_angle", "slope_joint", "curvature_per_angle", "curvature_joint")

_DEFAULT_ANGLES = {
    "slope_per_angle": (0.0, math.pi / 2),
    "slope_joint": (0.0, math.pi / 2),
    "curvature_per_angle": ANGLE_PRESETS["table4"],
    "curvature_joint": ANGLE_PRESETS["six"],
}


def replicate_seed(master_seed: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate),))


def generate_noise(rows: int, cols: int, seed) -> ImageGrid:
    """I.i.d. standard normal image, bit-identical for identical arguments."""
    if rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be >= 1, got {rows}x{cols}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    raw = np.random.Philox(ss).random_raw(rows * cols)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ImageGrid(special.ndtri(u).reshape(rows, cols))


@dataclass(frozen=True)
class Bump:
    """Isotropic Gaussian bump ``amplitude * exp(-d^2 / (2 width^2))``."""

    center: tuple[float, float]
    amplitude: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"bump width must be positive, got {self.width!r}")


def generate_phantom(bumps, rows: int, cols: int, noise_sigma: float = 0.0, seed=0) -> ImageGrid:
    """Sum of Gaussian bumps plus i.i.d. ``N(0, noise_sigma^2)`` noise."""
    bumps = [b if isinstance(b, Bump) else Bump(**b) for b in bumps]
    i = np.arange(rows, dtype=np.float64)[:, None]
    j = np.arange(cols, dtype=np.float64)[None, :]
    values = np.zeros((rows, cols))
    for b in bumps:
        d2 = (i - b.center[0]) ** 2 + (j - b.center[1]) ** 2
        values += b.amplitude * np.exp(-d2 / (2.0 * b.width**2))
    if noise_sigma > 0:
        values += noise_sigma * generate_noise(rows, cols, seed).values
    return ImageGrid(values)


def clopper_pearson(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for a proportion."""
    a = 1.0 - conf
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class SimConfig:
    """Type-I experiment settings.

    ``angles=None`` picks the mode's default set: the two axes for slope
    modes, ``ANGLE_PRESETS["table4"]`` for per-angle curvature and
    ``ANGLE_PRESETS["six"]`` for joint curvature.
    """

    replicates: int = 200
    rows: int = 280
    cols: int = 280
    margin_override: int | None = 40
    bandwidths: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    alpha: float = 0.05
    master_seed: int = 20240607
    mode: str = "slope_joint"
    angles: tuple[float, ...] | None = None
    sigma_mode: str = "known"
    one_sided: bool = False
    support_factor: float = 4.0
    workers: int | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.sigma_mode not in ("known", "estimate"):
            raise ValueError(f"sigma_mode must be 'known' or 'estimate', got {self.sigma_mode!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "bandwidths", tuple(float(h) for h in self.bandwidths))
        if self.angles is not None:
            object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    @property
    def order(self) -> str:
        return self.mode.split("_")[0]

    @property
    def joint(self) -> bool:
        return self.mode.endswith("joint")

    @property
    def resolved_angles(self) -> tuple[float, ...]:
        return self.angles if self.angles is not None else _DEFAULT_ANGLES[self.mode]

    def cell_labels(self) -> list[str]:
        if self.joint:
            return ["joint"]
        return [_angle_label(a) for a in self.resolved_angles]

    @classmethod
    def from_mapping(cls, data: dict) -> SimConfig:
        data = dict(data)
        if "angles" in data and data["angles"] is not None:
            data["angles"] = tuple(float(a) for a in data["angles"])
        if "bandwidths" in data:
            data["bandwidths"] = tuple(data["bandwidths"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _angle_label(theta: float) -> str:
    frac = theta / math.pi
    for den in (1, 2, 3, 4, 6, 12):
        num = round(frac * den)
        if abs(frac * den - num) < 1e-9:
            if num == 0:
                return "0"
            sign = "-" if num < 0 else ""
            num = abs(num)
            top = "pi" if num == 1 else f"{num}pi"
            return f"{sign}{top}" if den == 1 else f"{sign}{top}/{den}"
    return f"{theta:.6g}"


@dataclass(frozen=True)
class SimCell:
    h: float
    cell: str
    exceed_count: int
    replicates: int
    threshold: ThresholdSpec

    @property
    def rate(self) -> float:
        return self.exceed_count / self.replicates

    @property
    def ci95(self) -> tuple[float, float]:
        return clopper_pearson(self.exceed_count, self.replicates, 0.95)

    def ci(self, conf: float) -> tuple[float, float]:
        return clopper_pearson(self.exceed_count, self.replicates, conf)


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    cells: list[SimCell] = field(default_factory=list)

    def cell(self, h: float, label: str) -> SimCell:
        for c in self.cells:
            if c.h == float(h) and c.cell == label:
                return c
        raise KeyError((h, label))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["mode", "h", "cell", "exceed_count", "replicates", "rate", "ci95_lo", "ci95_hi", "u_crit"]
        )
        for c in self.cells:
            lo, hi = c.ci95
            w.writerow(
                [
                    self.config.mode,
                    format(c.h, "g"),
                    c.cell,
                    c.exceed_count,
                    c.replicates,
                    format(c.rate, ".17g"),
                    format(lo, ".17g"),
                    format(hi, ".17g"),
                    format(c.threshold.u_crit, ".17g"),
                ]
            )
        return buf.getvalue()


def _thresholds(config: SimConfig) -> dict:
    out = {}
    n_dir = len(config.resolved_angles) if config.joint else 1
    for h in config.bandwidths:
        region = interior((config.rows, config.cols), h, config.support_factor, config.margin_override)
        out[h] = (
            region,
            threshold_for_region(
                region, config.alpha, n_dir, h, config.order, one_sided=config.one_sided
            ),
        )
    return out


def _replicate(config: SimConfig, thresholds: dict, r: int) -> list[bool]:
    """Exceedance flags for replicate ``r``, ordered by (h, cell)."""
    grid = generate_noise(config.rows, config.cols, replicate_seed(config.master_seed, r))
    sigma = 1.0 if config.sigma_mode == "known" else estimate_sigma(grid)
    angles = config.resolved_angles
    flags = []
    for h in config.bandwidths:
        region, thr = thresholds[h]
        lm = LocalMoments(grid, h, region=region, support_factor=config.support_factor)
        maxima = []
        for theta in angles:
            t = lm.stat(direction_from_angle(theta), config.order, sigma).stats
            maxima.append(float(t.max()) if config.one_sided else float(np.abs(t).max()))
        u = thr.stat_threshold
        if config.joint:
            flags.append(max(maxima) >= u)
        else:
            flags.extend(m >= u for m in maxima)
    return flags


def _replicate_chunk(args):
    config, thresholds, reps = args
    return [_replicate(config, thresholds, r) for r in reps]


def _n_workers(requested):
    if requested is not None:
        return max(1, int(requested))
    cap = os.environ.get("SSS_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def type1_experiment(config: SimConfig) -> SimResult:
    """Count replicates whose null field exceeds the threshold anywhere.

    Per-angle modes test each angle on its own with ``N = 1``; joint modes
    use one threshold with ``N`` equal to the number of angles.
    """
    thresholds = _thresholds(config)
    reps = list(range(config.replicates))
    workers = min(_n_workers(config.workers), len(reps))
    if workers == 1:
        rows = [_replicate(config, thresholds, r) for r in reps]
    else:
        chunks = [reps[k::workers] for k in range(workers)]
        # spawn, not fork: numba's OpenMP pool is not fork-safe
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(workers, mp_context=ctx) as pool:
            parts = list(pool.map(_replicate_chunk, [(config, thresholds, c) for c in chunks]))
        by_rep = {}
        for chunk, part in zip(chunks, parts):
            by_rep.update(zip(chunk, part))
        rows = [by_rep[r] for r in reps]
    counts = np.sum(np.array(rows, dtype=np.int64), axis=0)
    labels = config.cell_labels()
    cells = []
    k = 0
    for h in config.bandwidths:
        for label in labels:
            cells.append(SimCell(h, label, int(counts[k]), config.replicates, thresholds[h][1]))
            k += 1
    return SimResult(config, cells)


@dataclass(frozen=True)
class PowerConfig:
    replicates: int = 100
    rows: int = 96
    cols: int = 128
    bandwidths: tuple[float, ...] = (4.0,)
    alpha: float = 0.05
    noise_sigma: float = 1.0
    master_seed: int = 7
    angles: tuple[float, ...] = ANGLE_PRESETS["six"]
    detect_radius: float = 3.0
    margin_override: int | None = None
    sigma_mode: str = "known"


def power_experiment(bumps, config: PowerConfig = PowerConfig()) -> dict:
    """Per-bump detection rates of the correctly signed class near each bump centre.

    A bump with positive amplitude is detected when a Peak pixel lies within
    ``detect_radius`` of its centre, a negative one when a Hole pixel does.
    Also reports the fraction of replicates with any significant pixel and
    the mean count of pixels per class.
    """
    bumps = [b if isinstance(b, Bump) else Bump(**b) for b in bumps]
    out = {}
    for h in config.bandwidths:
        region = interior((config.rows, config.cols), h, margin=config.margin_override)
        m = region.margin
        ii = np.arange(region.g_rows)[:, None] + m
        jj = np.arange(region.g_cols)[None, :] + m
        near = [
            (ii - b.center[0]) ** 2 + (jj - b.center[1]) ** 2 <= config.detect_radius**2 for b in bumps
        ]
        targets = [Category.HOLE if b.amplitude < 0 else Category.PEAK for b in bumps]
        detected = np.zeros(len(bumps), dtype=np.int64)
        any_sig = 0
        totals = {c.label: 0 for c in Category}
        for r in range(config.replicates):
            grid = generate_phantom(
                bumps, config.rows, config.cols, config.noise_sigma, replicate_seed(config.master_seed, r)
            )
            sigma = config.noise_sigma if config.sigma_mode == "known" else estimate_sigma(grid)
            res = curvature_analysis(grid, h, config.alpha, sigma, config.angles, region=region)
            for k, (mask, cat) in enumerate(zip(near, targets)):
                detected[k] += bool(np.any(res.category[mask] == cat))
            any_sig += res.n_significant > 0
            for label, n in res.counts().items():
                totals[label] += n
        out[float(h)] = {
            "detection_rate": [d / config.replicates for d in detected.tolist()],
            "detected": detected.tolist(),
            "any_significant_rate": any_sig / config.replicates,
            "mean_counts": {k: v / config.replicates for k, v in totals.items()},
            "threshold": res.threshold.to_dict(),
        }
    return out


def with_mode(config: SimConfig, mode: str, angles=None) -> SimConfig:
    return replace(config, mode=mode, angles=angles)
