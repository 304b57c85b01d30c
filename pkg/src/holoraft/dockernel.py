"""Numba kernels for the signed distance-to-collision metric.

Everything here works on flat float64 arrays so the same code drives single
queries, per-pair batches in the cycle/transition solvers, and the 4-D
lookup-table build.  A collision region is passed as (verts, starts, bboxes):
concatenated polygon vertices, per-polygon offsets into them, and per-polygon
bounding boxes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# Prefer OpenMP so the stale-TBB probe (and its warning) never runs.
_numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

TWO_PI = 2.0 * math.pi
_EPS = 1e-12


@njit(cache=True)
def point_in_polygon(px, py, vx, vy):
    """Even-odd point-in-polygon test."""
    n = vx.shape[0]
    inside = False
    j = n - 1
    for i in range(n):
        if (vy[i] > py) != (vy[j] > py):
            xcross = vx[i] + (py - vy[i]) * (vx[j] - vx[i]) / (vy[j] - vy[i])
            if px < xcross:
                inside = not inside
        j = i
    return inside


@njit(cache=True)
def _point_segment_dist(px, py, x1, y1, x2, y2):
    dx, dy = x2 - x1, y2 - y1
    len2 = dx * dx + dy * dy
    if len2 < _EPS:
        return math.hypot(px - x1, py - y1)
    t = ((px - x1) * dx + (py - y1) * dy) / len2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(px - (x1 + t * dx), py - (y1 + t * dy))


@njit(cache=True)
def _segment_segment_dist(ax, ay, bx, by, cx, cy, dx, dy):
    """Minimum distance between segments AB and CD (0 if they intersect)."""
    ux, uy = bx - ax, by - ay
    vx, vy = dx - cx, dy - cy
    d1 = vx * (ay - cy) - vy * (ax - cx)
    d2 = vx * (by - cy) - vy * (bx - cx)
    d3 = ux * (cy - ay) - uy * (cx - ax)
    d4 = ux * (dy - ay) - uy * (dx - ax)
    if d1 * d2 < 0.0 and d3 * d4 < 0.0:
        return 0.0
    best = _point_segment_dist(ax, ay, cx, cy, dx, dy)
    d = _point_segment_dist(bx, by, cx, cy, dx, dy)
    if d < best:
        best = d
    d = _point_segment_dist(cx, cy, ax, ay, bx, by)
    if d < best:
        best = d
    d = _point_segment_dist(dx, dy, ax, ay, bx, by)
    if d < best:
        best = d
    return best


@njit(cache=True)
def _min_dist_to_edges(ax, ay, bx, by, vx, vy):
    n = vx.shape[0]
    best = 1e300
    j = n - 1
    for i in range(n):
        d = _segment_segment_dist(ax, ay, bx, by, vx[j], vy[j], vx[i], vy[i])
        if d < best:
            best = d
        j = i
    return best


@njit(cache=True)
def _point_polygon_signed(px, py, vx, vy):
    """Negative penetration depth inside, positive clearance outside."""
    j = vx.shape[0] - 1
    best = 1e300
    for i in range(vx.shape[0]):
        d = _point_segment_dist(px, py, vx[j], vy[j], vx[i], vy[i])
        if d < best:
            best = d
        j = i
    if point_in_polygon(px, py, vx, vy):
        return -best
    return best


@njit(cache=True)
def doc_polygon(ax, ay, bx, by, vx, vy):
    """Four-case distance to collision of segment AB against one polygon.

    Positive: minimum phase-space distance when AB is disjoint from the
    polygon.  Negative: severity built from the interior portion of AB plus,
    when both endpoints are on the same side (both in or both out), the
    shorter escape/approach distance along the line through AB.
    """
    seg_len = math.hypot(bx - ax, by - ay)
    if seg_len < _EPS:
        return _point_polygon_signed(ax, ay, vx, vy)

    inside_a = point_in_polygon(ax, ay, vx, vy)
    inside_b = point_in_polygon(bx, by, vx, vy)

    n = vx.shape[0]
    ux, uy = bx - ax, by - ay
    # Crossing parameters of the infinite line through AB with every edge.
    ts = np.empty(n)
    n_ts = 0
    t_before = -1e300  # nearest crossing behind A (largest t < 0)
    t_after = 1e300    # nearest crossing beyond B (smallest t > 1)
    n_seg = 0
    t_first = 1e300
    t_last = -1e300
    j = n - 1
    for i in range(n):
        ex, ey = vx[i] - vx[j], vy[i] - vy[j]
        denom = ux * ey - uy * ex
        if abs(denom) > _EPS:
            wx, wy = vx[j] - ax, vy[j] - ay
            t = (wx * ey - wy * ex) / denom
            u = (wx * uy - wy * ux) / denom
            if -_EPS <= u <= 1.0 + _EPS:
                if -_EPS <= t <= 1.0 + _EPS:
                    ts[n_ts] = min(max(t, 0.0), 1.0)
                    n_ts += 1
                    n_seg += 1
                    if t < t_first:
                        t_first = t
                    if t > t_last:
                        t_last = t
                elif t < 0.0 and t > t_before:
                    t_before = t
                elif t > 1.0 and t < t_after:
                    t_after = t
        j = i

    if n_seg == 0 and not inside_a and not inside_b:
        return _min_dist_to_edges(ax, ay, bx, by, vx, vy)

    # Interior length by midpoint classification of the crossing subdivision.
    sub = np.empty(n_ts + 2)
    sub[0] = 0.0
    for i in range(n_ts):
        sub[i + 1] = ts[i]
    sub[n_ts + 1] = 1.0
    sub.sort()
    interior = 0.0
    for i in range(n_ts + 1):
        lo, hi = sub[i], sub[i + 1]
        if hi - lo <= 0.0:
            continue
        tm = 0.5 * (lo + hi)
        if point_in_polygon(ax + tm * ux, ay + tm * uy, vx, vy):
            interior += (hi - lo) * seg_len

    if inside_a and inside_b:
        ag = -t_before * seg_len if t_before > -1e299 else 1e300
        bh = (t_after - 1.0) * seg_len if t_after < 1e299 else 1e300
        extra = ag if ag < bh else bh
        if extra >= 1e299:
            extra = 0.0
        return -(interior + extra)
    if inside_a != inside_b:
        return -interior
    # Both endpoints outside; AB crosses through.
    if interior <= 0.0:
        return 0.0  # tangential boundary contact
    ag = t_first * seg_len
    bh = (1.0 - t_last) * seg_len
    return -(interior + (ag if ag < bh else bh))


@njit(cache=True)
def doc_region(ax, ay, bx, by, verts, starts, bboxes):
    """Most conservative DoC over all periodic copies of every polygon."""
    seg_minx = ax if ax < bx else bx
    seg_maxx = ax if ax > bx else bx
    seg_miny = ay if ay < by else by
    seg_maxy = ay if ay > by else by
    best = 1e300
    npoly = starts.shape[0] - 1
    for p in range(npoly):
        vx = verts[starts[p]:starts[p + 1], 0]
        vy = verts[starts[p]:starts[p + 1], 1]
        pminx, pminy, pmaxx, pmaxy = (bboxes[p, 0], bboxes[p, 1],
                                      bboxes[p, 2], bboxes[p, 3])
        kmin = int(math.floor((seg_minx - pmaxx) / TWO_PI))
        kmax = int(math.ceil((seg_maxx - pminx) / TWO_PI))
        lmin = int(math.floor((seg_miny - pmaxy) / TWO_PI))
        lmax = int(math.ceil((seg_maxy - pminy) / TWO_PI))
        for k in range(kmin, kmax + 1):
            sx = TWO_PI * k
            gx = 0.0
            if pminx + sx > seg_maxx:
                gx = pminx + sx - seg_maxx
            elif pmaxx + sx < seg_minx:
                gx = seg_minx - (pmaxx + sx)
            for l in range(lmin, lmax + 1):
                sy = TWO_PI * l
                gy = 0.0
                if pminy + sy > seg_maxy:
                    gy = pminy + sy - seg_maxy
                elif pmaxy + sy < seg_miny:
                    gy = seg_miny - (pmaxy + sy)
                gap = math.hypot(gx, gy)
                if gap > 0.0 and gap >= best:
                    continue  # cannot beat the current minimum
                d = doc_polygon(ax - sx, ay - sy, bx - sx, by - sy, vx, vy)
                if d < best:
                    best = d
    return best


@njit(cache=True)
def doc_region_batch(segs, verts, starts, bboxes):
    """DoC for each row of segs = [[ax, ay, bx, by], ...].

    Serial on purpose: solver batches hold only a handful of pairs, where
    thread-launch overhead would dwarf the work.
    """
    n = segs.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = doc_region(segs[i, 0], segs[i, 1], segs[i, 2], segs[i, 3],
                            verts, starts, bboxes)
    return out


@njit(cache=True, parallel=True)
def build_table_kernel(phi_axis, amp_axis, verts, starts, bboxes):
    """4-D swim-trajectory DoC table indexed (phi0_i, A_i, phi0_j, A_j)."""
    np_phi = phi_axis.shape[0]
    np_amp = amp_axis.shape[0]
    out = np.empty((np_phi, np_amp, np_phi, np_amp), dtype=np.float32)
    for i1 in prange(np_phi):
        phi_i = phi_axis[i1]
        for a1 in range(np_amp):
            amp_i = amp_axis[a1]
            for i2 in range(np_phi):
                phi_j = phi_axis[i2]
                for a2 in range(np_amp):
                    amp_j = amp_axis[a2]
                    d = doc_region(phi_i + amp_i, phi_j + amp_j,
                                   phi_i - amp_i, phi_j - amp_j,
                                   verts, starts, bboxes)
                    out[i1, a1, i2, a2] = np.float32(d)
    return out
