import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from sss.grid import GridError, ImageGrid, InteriorRegion, StatField, interior, load_image, save_csv


def test_csv_parse(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4\n")
    g = load_image(p)
    assert (g.rows, g.cols) == (2, 2)
    np.testing.assert_array_equal(g.values, [[1, 2], [3, 4]])


def test_empty_csv_has_no_rows(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(GridError, match="no rows"):
        load_image(p)


def test_ragged_csv(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(GridError, match="ragged"):
        load_image(p)


def test_nonfinite_names_cell():
    with pytest.raises(GridError, match="row 1, column 0"):
        ImageGrid([[1.0, 2.0], [np.nan, 4.0]])


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="input not found"):
        load_image(tmp_path / "nope.csv")


def test_values_are_read_only():
    g = ImageGrid(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        g.values[0, 0] = 1.0


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf])
def test_bad_spacing(bad):
    with pytest.raises(GridError):
        ImageGrid(np.zeros((2, 2)), spacing=bad)


def test_pgm_levels_kept(tmp_path):
    arr = np.arange(80 * 80, dtype=np.uint16).reshape(80, 80) % 1000
    ascii_pgm = tmp_path / "a.pgm"
    body = "\n".join(" ".join(str(v) for v in row) for row in arr)
    ascii_pgm.write_text(f"P2\n80 80\n999\n{body}\n")
    g = load_image(ascii_pgm)
    assert g.shape == (80, 80)
    np.testing.assert_array_equal(g.values, arr)

    binary = tmp_path / "b.pgm"
    Image.fromarray(arr.astype(np.uint8)).save(binary)
    np.testing.assert_array_equal(load_image(binary).values, arr.astype(np.uint8))

    wide = tmp_path / "w.pgm"
    wide.write_bytes(b"P5\n# comment\n80 80\n999\n" + arr.astype(">u2").tobytes())
    np.testing.assert_array_equal(load_image(wide).values, arr)


def test_empty_pgm(tmp_path):
    p = tmp_path / "e.pgm"
    p.write_bytes(b"")
    with pytest.raises(GridError, match="no rows"):
        load_image(p)


def test_png_gray_and_rgb(tmp_path):
    gray = (np.arange(64).reshape(8, 8) * 3).astype(np.uint8)
    p = tmp_path / "g.png"
    Image.fromarray(gray).save(p)
    np.testing.assert_array_equal(load_image(p).values, gray)

    rgb = np.stack([gray, gray, gray], axis=2)
    q = tmp_path / "c.png"
    Image.fromarray(rgb).save(q)
    np.testing.assert_allclose(load_image(q).values, gray, atol=0.5)


def test_png_16bit(tmp_path):
    arr = (np.arange(100).reshape(10, 10) * 600).astype(np.uint16)
    p = tmp_path / "d.png"
    Image.fromarray(arr).save(p)
    np.testing.assert_array_equal(load_image(p).values, arr)


def test_interior_default_margin():
    r = interior((280, 280), 16)
    assert r.margin == 64 and r.g == 152


def test_interior_override():
    r = interior((280, 280), 4, margin=40)
    assert (r.g_rows, r.g_cols, r.g) == (200, 200, 200)
    assert r.contains(40, 239) and not r.contains(39, 100)


def test_interior_too_small():
    with pytest.raises(GridError, match="minimum size is 33x33"):
        interior(ImageGrid(np.zeros((9, 9))), 4)


def test_nonsquare_g():
    r = interior((96, 128), 4)
    assert (r.g_rows, r.g_cols) == (64, 96)
    assert r.g == math.isqrt(64 * 96)
    assert not r.is_square


def test_statfield_shape_check():
    r = interior((20, 20), 1)
    with pytest.raises(GridError):
        StatField(r, (1.0, 0.0), "slope", np.zeros((3, 3)), 1.0, 1.0)
    with pytest.raises(GridError):
        StatField(r, (1.0, 1.0), "slope", np.zeros(r.shape), 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(
    arrays(
        np.float64,
        st.tuples(st.integers(1, 6), st.integers(1, 6)),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=64),
    )
)
def test_csv_roundtrip(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("rt") / "x.csv"
    save_csv(ImageGrid(values), p)
    np.testing.assert_array_equal(load_image(p).values, values)


@given(st.floats(0.1, 30), st.floats(0.1, 30))
def test_interior_monotone_in_h(h1, h2):
    lo, hi = sorted((h1, h2))
    a = interior((400, 400), lo)
    b = interior((400, 400), hi)
    assert b.g_rows <= a.g_rows
