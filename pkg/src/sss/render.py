"""PNG significance maps and SVG streamline overlays."""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import numpy as np

from .grid import ImageGrid
from .inference import Category, CurvatureResult, SlopeResult

__all__ = ["RenderPalette", "render_map", "render_streamlines"]


@dataclass(frozen=True)
class RenderPalette:
    colors: dict = field(
        default_factory=lambda: {
            Category.PEAK: (0, 0, 255),
            Category.HOLE: (255, 255, 0),
            Category.SADDLE: (255, 0, 0),
            Category.RIDGE: (128, 0, 128),
            Category.VALLEY: (255, 165, 0),
        }
    )
    streamline: tuple[int, int, int] = (0, 170, 0)

    def hex(self, rgb) -> str:
        return "#{:02x}{:02x}{:02x}".format(*rgb)


DEFAULT_PALETTE = RenderPalette()


def _gray(background) -> np.ndarray:
    v = background.values if isinstance(background, ImageGrid) else np.asarray(background, float)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        g = np.round((v - lo) / (hi - lo) * 255.0)
    else:
        g = np.zeros_like(v)
    return g.astype(np.uint8)


def _png(rgb: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(rgb)).save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def render_map(result, background, palette: RenderPalette = DEFAULT_PALETTE) -> bytes:
    """Grayscale background with significant interior pixels painted in."""
    gray = _gray(background)
    region = result.region
    if gray.shape != (region.rows, region.cols):
        raise ValueError(
            f"background {gray.shape} does not match the analysed image "
            f"{(region.rows, region.cols)}"
        )
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    view = rgb[region.slices]
    if isinstance(result, CurvatureResult):
        for cat, color in palette.colors.items():
            view[result.category == cat] = color
    elif isinstance(result, SlopeResult):
        view[result.significant] = palette.streamline
    else:
        raise TypeError(f"cannot render {type(result).__name__}")
    return _png(rgb)


def render_streamlines(lines, background, palette: RenderPalette = DEFAULT_PALETTE) -> bytes:
    """SVG with the background raster and one green polyline per streamline.

    Pixel ``(row, col)`` is drawn centred at ``x = col + 0.5``, ``y = row + 0.5``.
    """
    gray = _gray(background)
    rows, cols = gray.shape
    raster = base64.b64encode(_png(np.repeat(gray[:, :, None], 3, axis=2))).decode("ascii")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
        f'width="{cols}" height="{rows}" viewBox="0 0 {cols} {rows}">',
        f'<image x="0" y="0" width="{cols}" height="{rows}" style="image-rendering:pixelated" '
        f'xlink:href="data:image/png;base64,{raster}"/>',
    ]
    color = palette.hex(palette.streamline)
    for line in lines:
        pts = np.asarray(line.points, dtype=np.float64)
        x = pts[:, 1] + 0.5
        y = pts[:, 0] + 0.5
        if np.any(x < 0) or np.any(x > cols) or np.any(y < 0) or np.any(y > rows):
            raise ValueError("streamline leaves the image")
        coords = " L ".join(f"{a:.3f} {b:.3f}" for a, b in zip(x, y))
        parts.append(f'<path d="M {coords}" fill="none" stroke="{color}" stroke-width="0.6"/>')
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")
