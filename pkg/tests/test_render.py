import io
import re

import numpy as np
import pytest
from PIL import Image

from sss.grid import ImageGrid
from sss.inference import Category, Streamline, curvature_analysis, slope_analysis
from sss.render import DEFAULT_PALETTE, render_map, render_streamlines


def _decode(png):
    return np.array(Image.open(io.BytesIO(png)).convert("RGB"))


@pytest.fixture
def flat():
    grid = ImageGrid(np.tile(np.arange(40, dtype=float), (40, 1)))
    return grid, curvature_analysis(grid, 2, 0.05, 1.0)


def test_palette_is_bijective():
    colors = list(DEFAULT_PALETTE.colors.values())
    assert len(set(colors)) == len(colors) == 5
    assert DEFAULT_PALETTE.colors[Category.PEAK] == (0, 0, 255)
    assert DEFAULT_PALETTE.hex(DEFAULT_PALETTE.streamline) == "#00aa00"


def test_all_none_is_grayscale(flat):
    grid, res = flat
    assert res.n_significant == 0
    rgb = _decode(render_map(res, grid))
    assert np.all(rgb[..., 0] == rgb[..., 1]) and np.all(rgb[..., 1] == rgb[..., 2])


def test_single_peak_pixel(flat):
    grid, res = flat
    cat = res.category.copy()
    cat[5, 7] = Category.PEAK
    object.__setattr__(res, "category", cat)
    rgb = _decode(render_map(res, grid))
    blue = np.all(rgb == (0, 0, 255), axis=2)
    m = res.region.margin
    assert blue.sum() == 1 and blue[5 + m, 7 + m]


def test_render_deterministic(flat):
    grid, res = flat
    assert render_map(res, grid) == render_map(res, grid)


def test_slope_map_and_mismatch():
    grid = ImageGrid(np.tile(np.arange(40, dtype=float), (40, 1)))
    res = slope_analysis(grid, 2, 0.05, 0.01)
    rgb = _decode(render_map(res, grid))
    assert np.any(np.all(rgb == DEFAULT_PALETTE.streamline, axis=2))
    with pytest.raises(ValueError):
        render_map(res, ImageGrid(np.zeros((10, 10))))


def test_empty_svg():
    svg = render_streamlines([], ImageGrid(np.zeros((8, 12)))).decode()
    assert 'viewBox="0 0 12 8"' in svg
    assert "<path" not in svg and "<image" in svg


def test_one_line_three_points():
    line = Streamline(np.array([[1.0, 1.0], [1.5, 1.2], [2.0, 1.4]]), "max_steps")
    svg = render_streamlines([line], ImageGrid(np.zeros((8, 12)))).decode()
    paths = re.findall(r'<path d="([^"]*)"', svg)
    assert len(paths) == 1
    assert len(re.findall(r"[-\d.]+ [-\d.]+", paths[0])) == 3
    assert 'stroke="#00aa00"' in svg


def test_line_outside_view_rejected():
    line = Streamline(np.array([[1.0, 1.0], [1.0, 40.0]]), "max_steps")
    with pytest.raises(ValueError):
        render_streamlines([line], ImageGrid(np.zeros((8, 12))))
