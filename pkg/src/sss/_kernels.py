"""Hot loops: kernel-weighted moment fields and streamline integration.

Every routine has a numba implementation and a pure-numpy one. The numba
path is used when numba imports and ``SSS_DISABLE_NUMBA`` is unset (or set
to ``0``); :func:`set_backend` switches at runtime, which the tests and the
benchmark use to compare the two.

Moment fields are returned stacked in the order
``(H00, H10, H01, H20, H11, H02)`` where ``H_mk`` is the kernel-weighted sum
of ``Y[i+dx, j+dy] * dx**m * dy**k``; pixels outside the image contribute
nothing.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

if numba is not None and "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe, which warns on hosts with an old libtbb
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

MOMENT_ORDER = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

_TERMINATION = ("left_region", "lost_significance", "max_steps", "stagnation")


def _env_disabled() -> bool:
    return os.environ.get("SSS_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if (numba is not None and not _env_disabled()) else "numpy"


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


def configure_threads() -> None:
    """Apply the ``SSS_THREADS`` cap to numba's thread pool."""
    cap = os.environ.get("SSS_THREADS")
    if numba is None or not cap:
        return
    n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


# ---------------------------------------------------------------------------
# separable moment fields


def _separable_numpy(values, taps, margin, radius):
    # taps[0] and taps[2] are even in the offset and taps[1] odd, so each
    # pass folds the window around its centre: odd moments of symmetric
    # data then cancel exactly instead of to rounding error.
    rows, cols = values.shape
    r, m = radius, margin
    g_r, g_c = rows - 2 * m, cols - 2 * m
    padded = np.zeros((rows + 2 * r, cols + 2 * r))
    padded[r : r + rows, r : r + cols] = values
    # rows m-r .. m+g_r-1+r of the image are rows m .. m+g_r+2r-1 of padded
    band = padded[m : m + g_r + 2 * r]
    centre = band[:, m + r : m + r + g_c]
    inter = np.empty((3, g_r + 2 * r, g_c))
    inter[0] = taps[0, r] * centre
    inter[1] = 0.0
    inter[2] = taps[2, r] * centre
    for t in range(1, r + 1):
        plus = band[:, m + r + t : m + r + t + g_c]
        minus = band[:, m + r - t : m + r - t + g_c]
        even, odd = plus + minus, plus - minus
        inter[0] += taps[0, r + t] * even
        inter[1] += taps[1, r + t] * odd
        inter[2] += taps[2, r + t] * even
    out = np.empty((6, g_r, g_c))
    a0, a1, a2 = inter[0, r : r + g_r], inter[1, r : r + g_r], inter[2, r : r + g_r]
    out[0] = taps[0, r] * a0
    out[1] = 0.0
    out[2] = taps[0, r] * a1
    out[3] = taps[2, r] * a0
    out[4] = 0.0
    out[5] = taps[0, r] * a2
    for t in range(1, r + 1):
        lo, hi = r - t, r + t
        e0 = inter[0, hi : hi + g_r] + inter[0, lo : lo + g_r]
        d0 = inter[0, hi : hi + g_r] - inter[0, lo : lo + g_r]
        e1 = inter[1, hi : hi + g_r] + inter[1, lo : lo + g_r]
        d1 = inter[1, hi : hi + g_r] - inter[1, lo : lo + g_r]
        e2 = inter[2, hi : hi + g_r] + inter[2, lo : lo + g_r]
        out[0] += taps[0, hi] * e0
        out[1] += taps[1, hi] * d0
        out[2] += taps[0, hi] * e1
        out[3] += taps[2, hi] * e0
        out[4] += taps[1, hi] * d1
        out[5] += taps[0, hi] * e2
    return out


def _separable_loops(values, taps, margin, radius):
    rows, cols = values.shape
    r, m = radius, margin
    g_r, g_c = rows - 2 * m, cols - 2 * m
    n_p = g_r + 2 * r
    inter = np.zeros((3, n_p, g_c))
    for pp in numba.prange(n_p):
        p = m - r + pp
        if p < 0 or p >= rows:
            continue
        for jj in range(g_c):
            j = m + jj
            y = values[p, j]
            s0 = taps[0, r] * y
            s1 = 0.0
            s2 = taps[2, r] * y
            for t in range(1, r + 1):
                yp = values[p, j + t] if j + t < cols else 0.0
                ym = values[p, j - t] if j - t >= 0 else 0.0
                s0 += taps[0, r + t] * (yp + ym)
                s1 += taps[1, r + t] * (yp - ym)
                s2 += taps[2, r + t] * (yp + ym)
            inter[0, pp, jj] = s0
            inter[1, pp, jj] = s1
            inter[2, pp, jj] = s2
    out = np.empty((6, g_r, g_c))
    for ii in numba.prange(g_r):
        c = ii + r
        for jj in range(g_c):
            a0 = inter[0, c, jj]
            a1 = inter[1, c, jj]
            a2 = inter[2, c, jj]
            h00 = taps[0, r] * a0
            h10 = 0.0
            h01 = taps[0, r] * a1
            h20 = taps[2, r] * a0
            h11 = 0.0
            h02 = taps[0, r] * a2
            for t in range(1, r + 1):
                p0 = inter[0, c + t, jj]
                m0 = inter[0, c - t, jj]
                p1 = inter[1, c + t, jj]
                m1 = inter[1, c - t, jj]
                h00 += taps[0, r + t] * (p0 + m0)
                h10 += taps[1, r + t] * (p0 - m0)
                h01 += taps[0, r + t] * (p1 + m1)
                h20 += taps[2, r + t] * (p0 + m0)
                h11 += taps[1, r + t] * (p1 - m1)
                h02 += taps[0, r + t] * (inter[2, c + t, jj] + inter[2, c - t, jj])
            out[0, ii, jj] = h00
            out[1, ii, jj] = h10
            out[2, ii, jj] = h01
            out[3, ii, jj] = h20
            out[4, ii, jj] = h11
            out[5, ii, jj] = h02
    return out


# ---------------------------------------------------------------------------
# direct double sums (oracle path)


def _direct_numpy(values, table, margin, radius):
    rows, cols = values.shape
    r, m = radius, margin
    g_r, g_c = rows - 2 * m, cols - 2 * m
    padded = np.zeros((rows + 2 * r, cols + 2 * r))
    padded[r : r + rows, r : r + cols] = values
    out = np.zeros((6, g_r, g_c))
    for a in range(2 * r + 1):
        dx = a - r
        for b in range(2 * r + 1):
            dy = b - r
            w = table[a, b]
            y = padded[m + a : m + a + g_r, m + b : m + b + g_c]
            wy = w * y
            out[0] += wy
            out[1] += dx * wy
            out[2] += dy * wy
            out[3] += dx * dx * wy
            out[4] += dx * dy * wy
            out[5] += dy * dy * wy
    return out


def _direct_loops(values, table, margin, radius):
    rows, cols = values.shape
    r, m = radius, margin
    g_r, g_c = rows - 2 * m, cols - 2 * m
    out = np.empty((6, g_r, g_c))
    for ii in numba.prange(g_r):
        i = m + ii
        for jj in range(g_c):
            j = m + jj
            h00 = 0.0
            h10 = 0.0
            h01 = 0.0
            h20 = 0.0
            h11 = 0.0
            h02 = 0.0
            for dx in range(-r, r + 1):
                p = i + dx
                if p < 0 or p >= rows:
                    continue
                for dy in range(-r, r + 1):
                    q = j + dy
                    if q < 0 or q >= cols:
                        continue
                    wy = table[dx + r, dy + r] * values[p, q]
                    h00 += wy
                    h10 += dx * wy
                    h01 += dy * wy
                    h20 += dx * dx * wy
                    h11 += dx * dy * wy
                    h02 += dy * dy * wy
            out[0, ii, jj] = h00
            out[1, ii, jj] = h10
            out[2, ii, jj] = h01
            out[3, ii, jj] = h20
            out[4, ii, jj] = h11
            out[5, ii, jj] = h02
    return out


# ---------------------------------------------------------------------------
# streamline integration


def _bilinear(field, r, c):
    n_r, n_c = field.shape
    r0 = min(max(int(math.floor(r)), 0), n_r - 2) if n_r > 1 else 0
    c0 = min(max(int(math.floor(c)), 0), n_c - 2) if n_c > 1 else 0
    fr = r - r0
    fc = c - c0
    r1 = min(r0 + 1, n_r - 1)
    c1 = min(c0 + 1, n_c - 1)
    return (
        field[r0, c0] * (1 - fr) * (1 - fc)
        + field[r1, c0] * fr * (1 - fc)
        + field[r0, c1] * (1 - fr) * fc
        + field[r1, c1] * fr * fc
    )


def _direction(grad_r, grad_c, r, c):
    gr = _bilinear(grad_r, r, c)
    gc = _bilinear(grad_c, r, c)
    norm = math.sqrt(gr * gr + gc * gc)
    if norm == 0.0:
        return 0.0, 0.0
    return gr / norm, gc / norm


def _inside(r, c, n_r, n_c):
    return r >= 0.0 and c >= 0.0 and r <= n_r - 1 and c <= n_c - 1


def _trace_loop(grad_r, grad_c, mask, r, c, step, max_steps):
    """Fixed-step RK4 along the normalized gradient, in region coordinates.

    Returns ``(points, n_points, reason)`` with ``reason`` indexing
    ``_TERMINATION``.
    """
    n_r, n_c = mask.shape
    pts = np.empty((max_steps + 1, 2))
    pts[0, 0] = r
    pts[0, 1] = c
    n = 1
    reason = 2
    for _ in range(max_steps):
        k1r, k1c = _direction(grad_r, grad_c, r, c)
        r2, c2 = r + 0.5 * step * k1r, c + 0.5 * step * k1c
        if not _inside(r2, c2, n_r, n_c):
            reason = 0
            break
        k2r, k2c = _direction(grad_r, grad_c, r2, c2)
        r3, c3 = r + 0.5 * step * k2r, c + 0.5 * step * k2c
        if not _inside(r3, c3, n_r, n_c):
            reason = 0
            break
        k3r, k3c = _direction(grad_r, grad_c, r3, c3)
        r4, c4 = r + step * k3r, c + step * k3c
        if not _inside(r4, c4, n_r, n_c):
            reason = 0
            break
        k4r, k4c = _direction(grad_r, grad_c, r4, c4)
        dr = step * (k1r + 2.0 * k2r + 2.0 * k3r + k4r) / 6.0
        dc = step * (k1c + 2.0 * k2c + 2.0 * k3c + k4c) / 6.0
        nr, nc = r + dr, c + dc
        if not _inside(nr, nc, n_r, n_c):
            reason = 0
            break
        if math.sqrt(dr * dr + dc * dc) < 1e-6:
            reason = 3
            break
        if not mask[int(math.floor(nr + 0.5)), int(math.floor(nc + 0.5))]:
            reason = 1
            break
        r, c = nr, nc
        pts[n, 0] = r
        pts[n, 1] = c
        n += 1
    return pts, n, reason


if numba is not None:
    _separable_nb = numba.njit(parallel=True, cache=True)(_separable_loops)
    _direct_nb = numba.njit(parallel=True, cache=True)(_direct_loops)
    _bilinear = numba.njit(cache=True)(_bilinear)
    _direction = numba.njit(cache=True)(_direction)
    _inside = numba.njit(cache=True)(_inside)
    _trace_nb = numba.njit(cache=True)(_trace_loop)
else:  # pragma: no cover
    _trace_nb = None


def _np_bilinear(field, r, c):
    n_r, n_c = field.shape
    r0 = np.clip(np.floor(r).astype(np.int64), 0, max(n_r - 2, 0))
    c0 = np.clip(np.floor(c).astype(np.int64), 0, max(n_c - 2, 0))
    fr, fc = r - r0, c - c0
    r1, c1 = np.minimum(r0 + 1, n_r - 1), np.minimum(c0 + 1, n_c - 1)
    return (
        field[r0, c0] * (1 - fr) * (1 - fc)
        + field[r1, c0] * fr * (1 - fc)
        + field[r0, c1] * (1 - fr) * fc
        + field[r1, c1] * fr * fc
    )


def _np_direction(grad_r, grad_c, r, c):
    gr = _np_bilinear(grad_r, r, c)
    gc = _np_bilinear(grad_c, r, c)
    norm = np.sqrt(gr * gr + gc * gc)
    safe = np.where(norm == 0.0, 1.0, norm)
    return np.where(norm == 0.0, 0.0, gr / safe), np.where(norm == 0.0, 0.0, gc / safe)


def _trace_numpy(grad_r, grad_c, mask, starts, step, max_steps):
    """All seeds advanced in lockstep; same arithmetic as :func:`_trace_loop`."""
    n_r, n_c = mask.shape
    k = len(starts)
    pts = np.empty((k, max_steps + 1, 2))
    pts[:, 0] = starts
    count = np.ones(k, dtype=np.int64)
    reason = np.full(k, 2, dtype=np.int64)
    live = np.arange(k)
    r, c = starts[:, 0].copy(), starts[:, 1].copy()

    def inside(a, b):
        return (a >= 0.0) & (b >= 0.0) & (a <= n_r - 1) & (b <= n_c - 1)

    for _ in range(max_steps):
        if live.size == 0:
            break
        ks = []
        sel = np.arange(live.size)
        for frac in (0.0, 0.5, 0.5, 1.0):
            if ks:
                kr, kc = ks[-1]
                pr, pc = r[sel] + frac * step * kr, c[sel] + frac * step * kc
                ok = inside(pr, pc)
                reason[live[sel[~ok]]] = 0
                sel, pr, pc = sel[ok], pr[ok], pc[ok]
                ks = [(a[ok], b[ok]) for a, b in ks]
            else:
                pr, pc = r, c
            ks.append(_np_direction(grad_r, grad_c, pr, pc))
        (k1r, k1c), (k2r, k2c), (k3r, k3c), (k4r, k4c) = ks
        dr = step * (k1r + 2.0 * k2r + 2.0 * k3r + k4r) / 6.0
        dc = step * (k1c + 2.0 * k2c + 2.0 * k3c + k4c) / 6.0
        nr, nc = r[sel] + dr, c[sel] + dc
        ok = inside(nr, nc)
        reason[live[sel[~ok]]] = 0
        stalled = ok & (np.sqrt(dr * dr + dc * dc) < 1e-6)
        reason[live[sel[stalled]]] = 3
        ok &= ~stalled
        idx_r = np.floor(np.where(ok, nr, 0.0) + 0.5).astype(np.int64)
        idx_c = np.floor(np.where(ok, nc, 0.0) + 0.5).astype(np.int64)
        lost = ok & ~mask[idx_r, idx_c]
        reason[live[sel[lost]]] = 1
        ok &= ~lost
        sel, nr, nc = sel[ok], nr[ok], nc[ok]
        lines = live[sel]
        pts[lines, count[lines], 0] = nr
        pts[lines, count[lines], 1] = nc
        count[lines] += 1
        r, c, live = nr, nc, lines
    return [(pts[i, : count[i]].copy(), int(reason[i])) for i in range(k)]


# ---------------------------------------------------------------------------
# public dispatchers


def _check(values, margin, radius):
    values = np.ascontiguousarray(values, dtype=np.float64)
    rows, cols = values.shape
    if radius < 0 or margin < 0 or rows - 2 * margin < 1 or cols - 2 * margin < 1:
        raise ValueError(f"invalid margin {margin} / radius {radius} for shape {values.shape}")
    return values


def separable_moments(values, taps, margin, radius):
    """Moment fields over the interior via two 1-D passes.

    ``taps`` has shape ``(3, 2*radius+1)`` holding ``d**k * k(d)`` for the
    1-D Gaussian factor ``k`` and ``k = 0, 1, 2``.
    """
    values = _check(values, margin, radius)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    if _backend == "numba":
        return _separable_nb(values, taps, int(margin), int(radius))
    return _separable_numpy(values, taps, int(margin), int(radius))


def direct_moments(values, table, margin, radius):
    """Moment fields over the interior via the full 2-D double sum.

    ``table[dx + radius, dy + radius]`` is the 2-D kernel weight.
    """
    values = _check(values, margin, radius)
    table = np.ascontiguousarray(table, dtype=np.float64)
    if _backend == "numba":
        return _direct_nb(values, table, int(margin), int(radius))
    return _direct_numpy(values, table, int(margin), int(radius))


def trace_many(grad_r, grad_c, mask, starts, step, max_steps):
    """Integrate one streamline per start; returns ``[(points, reason_name), ...]``.

    Points and starts are in region coordinates ``(row, col)``.
    """
    grad_r = np.ascontiguousarray(grad_r, dtype=np.float64)
    grad_c = np.ascontiguousarray(grad_c, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    starts = np.asarray(starts, dtype=np.float64).reshape(-1, 2)
    step, max_steps = float(step), int(max_steps)
    if _backend == "numba":
        out = []
        for r, c in starts:
            pts, n, reason = _trace_nb(grad_r, grad_c, mask, float(r), float(c), step, max_steps)
            out.append((pts[:n].copy(), _TERMINATION[reason]))
        return out
    if len(starts) == 0:
        return []
    return [(p, _TERMINATION[k]) for p, k in _trace_numpy(grad_r, grad_c, mask, starts, step, max_steps)]


def trace(grad_r, grad_c, mask, start, step, max_steps):
    """Integrate one streamline; returns ``(points, reason_name)``."""
    return trace_many(grad_r, grad_c, mask, [start], step, max_steps)[0]
