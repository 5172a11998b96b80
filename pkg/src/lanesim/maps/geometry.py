"""Polyline and polygon helpers shared by the map engine.

All coordinates are meters in the scene frame; polylines are (M,2)
arrays, polygons are (M,2) vertex rings (implicitly closed).
"""

from __future__ import annotations

import numpy as np


def polyline_lengths(pts: np.ndarray) -> np.ndarray:
    """Cumulative arclength at each vertex (first entry 0)."""
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(d)])


def polyline_length(pts: np.ndarray) -> float:
    return float(polyline_lengths(pts)[-1])


def point_at_arclength(pts: np.ndarray, s: float) -> tuple[np.ndarray, float]:
    """Position and tangent heading at arclength s (clamped to the ends)."""
    cum = polyline_lengths(pts)
    s = float(np.clip(s, 0.0, cum[-1]))
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(i, len(pts) - 2)
    seg = pts[i + 1] - pts[i]
    seg_len = np.linalg.norm(seg)
    t = 0.0 if seg_len == 0 else (s - cum[i]) / seg_len
    pos = pts[i] + t * seg
    heading = float(np.arctan2(seg[1], seg[0]))
    return pos, heading


def project_to_polyline(pts: np.ndarray, p) -> tuple[float, float, float]:
    """Project p onto the polyline.

    Returns (arclength, signed lateral offset, tangent heading); lateral
    is positive to the left of travel direction.
    """
    p = np.asarray(p, dtype=float)
    cum = polyline_lengths(pts)
    best = (np.inf, 0.0, 0.0, 0.0)
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        q = a + t * ab
        d = float(np.linalg.norm(p - q))
        if d < best[0]:
            heading = float(np.arctan2(ab[1], ab[0]))
            cross = ab[0] * (p[1] - q[1]) - ab[1] * (p[0] - q[0])
            denom_l = np.linalg.norm(ab)
            side = 0.0 if denom_l == 0 else float(np.sign(cross))
            best = (d, cum[i] + t * np.linalg.norm(ab), side * d, heading)
    _, s, lateral, heading = best
    return s, lateral, heading


def offset_polyline(pts: np.ndarray, offset: float) -> np.ndarray:
    """Parallel polyline offset to the left by `offset` (miter normals)."""
    d = np.diff(pts, axis=0)
    seg_n = np.stack([-d[:, 1], d[:, 0]], axis=1)
    seg_n /= np.maximum(np.linalg.norm(seg_n, axis=1, keepdims=True), 1e-12)
    vert_n = np.empty_like(pts)
    vert_n[0] = seg_n[0]
    vert_n[-1] = seg_n[-1]
    if len(pts) > 2:
        mid = seg_n[:-1] + seg_n[1:]
        mid /= np.maximum(np.linalg.norm(mid, axis=1, keepdims=True), 1e-12)
        vert_n[1:-1] = mid
    return pts + offset * vert_n


def lane_polygon(centerline: np.ndarray, width: float) -> np.ndarray:
    """Closed lane footprint: left edge forward, right edge back."""
    left = offset_polyline(centerline, width / 2.0)
    right = offset_polyline(centerline, -width / 2.0)
    return np.concatenate([left, right[::-1]], axis=0)


def points_in_polygon(poly: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Even-odd ray-cast membership for many points at once."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x2 - x1) * (py - y1) / (y2 - y1) + x1
        inside ^= crosses & (px < xint)
    return inside


def dist_to_polyline(pts: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Euclidean distance from many points to a polyline."""
    best = np.full(px.shape, np.inf)
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0:
            d = np.hypot(px - a[0], py - a[1])
        else:
            t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0.0, 1.0)
            d = np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))
        np.minimum(best, d, out=best)
    return best


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


def box_corners(x, y, w, h, theta) -> np.ndarray:
    """Corners of an oriented box; w is the extent along heading."""
    c, s = np.cos(theta), np.sin(theta)
    local = np.array([[w / 2, h / 2], [w / 2, -h / 2], [-w / 2, -h / 2], [-w / 2, h / 2]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])
