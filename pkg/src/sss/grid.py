"""Image container, file I/O and interior-region bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GridError",
    "ImageGrid",
    "InteriorRegion",
    "StatField",
    "interior",
    "load_image",
    "save_csv",
]

FORMATS = ("csv", "pgm", "png-gray")


class GridError(ValueError):
    """Raised for malformed images or regions that do not fit an image."""


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Rectangular array of intensities on a regular lattice.

    Parameters
    ----------
    values : array_like
        Two-dimensional intensities. Row index ``i`` is the first axis.
    spacing : float
        Lattice spacing; bandwidths are always given in pixel units so the
        spacing is informational only.
    """

    values: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise GridError(f"image must be two-dimensional, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise GridError("no rows")
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            i, j = bad[0]
            raise GridError(f"non-finite value at row {i}, column {j}: {arr[i, j]!r}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise GridError(f"spacing must be positive, got {self.spacing!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class InteriorRegion:
    """The central block of pixels at which statistics are evaluated.

    ``margin`` pixels are dropped on every side of a ``rows x cols`` image,
    leaving ``g_rows x g_cols`` evaluable pixels.
    """

    margin: int
    g_rows: int
    g_cols: int
    rows: int
    cols: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.g_rows, self.g_cols)

    @property
    def slices(self) -> tuple[slice, slice]:
        m = self.margin
        return (slice(m, m + self.g_rows), slice(m, m + self.g_cols))

    @property
    def g(self) -> int:
        """Effective side length; ``floor(sqrt(g_rows * g_cols))`` when not square."""
        if self.g_rows == self.g_cols:
            return self.g_rows
        return math.isqrt(self.g_rows * self.g_cols)

    @property
    def is_square(self) -> bool:
        return self.g_rows == self.g_cols

    def contains(self, row: float, col: float) -> bool:
        """True when the (possibly fractional) image position is inside the region."""
        m = self.margin
        return (m <= row <= m + self.g_rows - 1) and (m <= col <= m + self.g_cols - 1)


@dataclass(frozen=True, eq=False)
class StatField:
    """Standardized statistics for one direction and derivative order."""

    region: InteriorRegion
    direction: tuple[float, float]
    order: str
    stats: np.ndarray
    sigma_used: float
    h: float = field(default=float("nan"))

    def __post_init__(self):
        u, v = self.direction
        if abs(u * u + v * v - 1.0) >= 1e-12:
            raise GridError(f"direction {self.direction} is not a unit vector")
        if self.stats.shape != self.region.shape:
            raise GridError(
                f"stats shape {self.stats.shape} does not match region {self.region.shape}"
            )
        if self.order not in ("slope", "curvature"):
            raise GridError(f"unknown order {self.order!r}")


def interior(
    grid: ImageGrid | tuple[int, int],
    h: float,
    support_factor: float = 4.0,
    margin: int | None = None,
) -> InteriorRegion:
    """Evaluation region for bandwidth ``h``.

    The margin defaults to ``ceil(support_factor * h)``, the kernel support
    radius, so every evaluated pixel sees an untruncated kernel. An explicit
    ``margin`` overrides this (for instance 40 on a 280 x 280 image gives the
    usual 200 x 200 evaluation grid); kernel sums are then clipped at the
    image border.
    """
    if not h > 0:
        raise GridError(f"bandwidth must be positive, got {h!r}")
    if not support_factor >= 1:
        raise GridError(f"support_factor must be >= 1, got {support_factor!r}")
    rows, cols = grid.shape if isinstance(grid, ImageGrid) else grid
    if margin is None:
        margin = math.ceil(support_factor * h)
    margin = int(margin)
    if margin < 0:
        raise GridError(f"margin must be non-negative, got {margin}")
    g_rows = rows - 2 * margin
    g_cols = cols - 2 * margin
    if g_rows < 1 or g_cols < 1:
        need = 2 * margin + 1
        raise GridError(
            f"image {rows}x{cols} too small for margin {margin} "
            f"(h={h}); minimum size is {need}x{need}"
        )
    return InteriorRegion(margin, g_rows, g_cols, rows, cols)


def _load_csv(path: Path) -> np.ndarray:
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GridError(f"no rows in {path}")
    rows = []
    for r, line in enumerate(lines):
        cells = line.split(",")
        row = []
        for c, cell in enumerate(cells):
            try:
                row.append(float(cell))
            except ValueError:
                raise GridError(f"cannot parse row {r}, column {c} of {path}: {cell!r}") from None
        if rows and len(row) != len(rows[0]):
            raise GridError(
                f"ragged CSV: row {r} has {len(row)} columns, expected {len(rows[0])}"
            )
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def _load_pgm(path: Path) -> np.ndarray:
    # Pillow rescales PGM files whose maxval is not 255 or 65535, so parse
    # the header directly to keep the stored levels.
    data = path.read_bytes()
    if not data:
        raise GridError(f"no rows in {path}")
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                break
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        if end == pos:
            break
        fields.append(data[pos:end])
        pos = end
    if len(fields) < 4 or fields[0] not in (b"P2", b"P5"):
        raise GridError(f"{path} is not a P2/P5 PGM file")
    try:
        cols, rows, maxval = (int(f) for f in fields[1:4])
    except ValueError:
        raise GridError(f"bad PGM header in {path}") from None
    if rows < 1 or cols < 1:
        raise GridError(f"no rows in {path}")
    if fields[0] == b"P2":
        tokens = data[pos:].split()
        if len(tokens) != rows * cols:
            raise GridError(f"{path}: expected {rows * cols} values, found {len(tokens)}")
        return np.array([int(t) for t in tokens], dtype=np.float64).reshape(rows, cols)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    body = data[pos + 1 : pos + 1 + rows * cols * dtype.itemsize]
    if len(body) != rows * cols * dtype.itemsize:
        raise GridError(f"{path}: truncated PGM data")
    return np.frombuffer(body, dtype=dtype).astype(np.float64).reshape(rows, cols)


def _load_raster(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I", "I;16", "I;16B", "I;16L", "F", "1"):
            arr = np.array(im)
        elif im.mode in ("LA", "PA"):
            arr = np.array(im.getchannel(0))
        else:
            # ITU-R 601-2 luma, kept in floating point
            arr = np.array(im.convert("RGB").convert("F"))
    return arr.astype(np.float64)


def load_image(path: str | Path, format: str | None = None) -> ImageGrid:
    """Read an image from CSV, PGM (P2/P5) or grayscale PNG.

    Integer gray levels are kept as they are; no rescaling is applied.
    """
    path = Path(path)
    if format is None:
        suffix = path.suffix.lower()
        format = {".csv": "csv", ".pgm": "pgm", ".png": "png-gray"}.get(suffix)
        if format is None:
            raise GridError(f"cannot infer format from {path.name}; pass one of {FORMATS}")
    if format not in FORMATS:
        raise GridError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    if format == "csv":
        values = _load_csv(path)
    elif format == "pgm":
        values = _load_pgm(path)
    else:
        if path.stat().st_size == 0:
            raise GridError(f"no rows in {path}")
        try:
            values = _load_raster(path)
        except GridError:
            raise
        except Exception as exc:  # PIL raises a variety of types
            raise GridError(f"unreadable {format} file {path}: {exc}") from exc
    return ImageGrid(values)


def save_csv(grid: ImageGrid | np.ndarray, path: str | Path) -> None:
    """Write values row-major with 17 significant digits (round-trips float64)."""
    values = grid.values if isinstance(grid, ImageGrid) else np.asarray(grid)
    with open(path, "w") as fh:
        for row in values:
            fh.write(",".join(format(float(x), ".17g") for x in row))
            fh.write("\n")
