"""Multi-channel map rasterization.

Thirteen base channels plus two traffic-control channels. The channel
inventory is fixed and documented here; consumers index by name through
CHANNELS.

    0  road          union of lane footprints
    1  intersection  lane footprints flagged as intersection interior
    2  centerline    thin band along each centerline
    3  boundary      thin band along lane edges
    4  turn_left     footprints of left-turn lanes
    5  turn_right    footprints of right-turn lanes
    6  bike_bus      reserved, always zero
    7  crosswalk     crosswalk polygons
    8  stop_line     short band at the end of light-controlled lanes
    9  speed_low     lanes with speed limit  < 8 m/s
    10 speed_mid     lanes with 8 <= limit < 14 m/s
    11 speed_high    lanes with limit >= 14 m/s
    12 drivable      union of all lane footprints and intersections
    13 ctrl_green    lanes whose light is green at the queried tick
    14 ctrl_red      lanes whose light is red at the queried tick
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .graph import LaneGraph, TrafficControl

CHANNELS = [
    "road",
    "intersection",
    "centerline",
    "boundary",
    "turn_left",
    "turn_right",
    "bike_bus",
    "crosswalk",
    "stop_line",
    "speed_low",
    "speed_mid",
    "speed_high",
    "drivable",
    "ctrl_green",
    "ctrl_red",
]
N_BASE = 13
N_CONTROL = 2

POLICY_RESOLUTION = 0.8  # meters/cell for the policy's map features
DRIVABLE_RESOLUTION = 0.4  # finer grid so a 2 m vehicle cannot straddle a gap


@dataclass
class MapRaster:
    channels: np.ndarray  # (C, H, W) in {0.0, 1.0}
    roi: tuple[float, float, float, float]
    resolution: float

    @property
    def shape(self):
        return self.channels.shape

    def index(self, name: str) -> int:
        return CHANNELS.index(name)

    def world_to_cell(self, x, y):
        """Float (row, col) cell coordinates of world points."""
        x0, y0, _, _ = self.roi
        col = (np.asarray(x) - x0) / self.resolution - 0.5
        row = (np.asarray(y) - y0) / self.resolution - 0.5
        return row, col


def _grid(roi, resolution):
    x0, y0, w, h = roi
    nw = max(1, int(round(w / resolution)))
    nh = max(1, int(round(h / resolution)))
    xs = x0 + (np.arange(nw) + 0.5) * resolution
    ys = y0 + (np.arange(nh) + 0.5) * resolution
    return nh, nw, xs, ys


def _fill_polygon(mask, poly, roi, resolution, xs, ys):
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    j0 = max(0, int((lo[0] - roi[0]) / resolution) - 1)
    j1 = min(len(xs), int((hi[0] - roi[0]) / resolution) + 2)
    i0 = max(0, int((lo[1] - roi[1]) / resolution) - 1)
    i1 = min(len(ys), int((hi[1] - roi[1]) / resolution) + 2)
    if j0 >= j1 or i0 >= i1:
        return
    px, py = np.meshgrid(xs[j0:j1], ys[i0:i1])
    inside = geo.points_in_polygon(poly, px, py)
    mask[i0:i1, j0:j1] |= inside


def _fill_band(mask, polyline, half_width, roi, resolution, xs, ys):
    lo = polyline.min(axis=0) - half_width
    hi = polyline.max(axis=0) + half_width
    j0 = max(0, int((lo[0] - roi[0]) / resolution) - 1)
    j1 = min(len(xs), int((hi[0] - roi[0]) / resolution) + 2)
    i0 = max(0, int((lo[1] - roi[1]) / resolution) - 1)
    i1 = min(len(ys), int((hi[1] - roi[1]) / resolution) + 2)
    if j0 >= j1 or i0 >= i1:
        return
    px, py = np.meshgrid(xs[j0:j1], ys[i0:i1])
    mask[i0:i1, j0:j1] |= geo.dist_to_polyline(polyline, px, py) <= half_width


def rasterize(
    graph: LaneGraph,
    control: TrafficControl | None,
    roi=None,
    resolution: float = POLICY_RESOLUTION,
    tick: int = 0,
) -> MapRaster:
    """Deterministic rasterization of the lane graph; control channels
    reflect the queried tick. An empty graph yields an all-zero raster."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    roi = tuple(roi if roi is not None else graph.roi)
    if roi[2] <= 0 or roi[3] <= 0:
        raise ValueError("roi extents must be positive")
    nh, nw, xs, ys = _grid(roi, resolution)
    masks = np.zeros((len(CHANNELS), nh, nw), dtype=bool)
    band = max(0.3, 0.75 * resolution)

    for sid in sorted(graph.segments):
        seg = graph.segments[sid]
        poly = seg.polygon
        _fill_polygon(masks[0], poly, roi, resolution, xs, ys)
        _fill_polygon(masks[12], poly, roi, resolution, xs, ys)
        if seg.in_intersection:
            _fill_polygon(masks[1], poly, roi, resolution, xs, ys)
        _fill_band(masks[2], seg.centerline, band, roi, resolution, xs, ys)
        for side in (0.5, -0.5):
            edge = geo.offset_polyline(seg.centerline, side * seg.width)
            _fill_band(masks[3], edge, band * 0.8, roi, resolution, xs, ys)
        if seg.turn == "left":
            _fill_polygon(masks[4], poly, roi, resolution, xs, ys)
        elif seg.turn == "right":
            _fill_polygon(masks[5], poly, roi, resolution, xs, ys)
        if seg.speed_limit < 8.0:
            _fill_polygon(masks[9], poly, roi, resolution, xs, ys)
        elif seg.speed_limit < 14.0:
            _fill_polygon(masks[10], poly, roi, resolution, xs, ys)
        else:
            _fill_polygon(masks[11], poly, roi, resolution, xs, ys)
        if seg.light is not None:
            end, heading = seg.pose_at(seg.length)
            across = np.array([-np.sin(heading), np.cos(heading)])
            stop = np.stack([end - across * seg.width / 2, end + across * seg.width / 2])
            _fill_band(masks[8], stop, max(0.4, resolution * 0.6), roi, resolution, xs, ys)
            if control is not None:
                state = control.state_at(seg.light, tick)
                ch = 13 if state == "green" else 14
                _fill_polygon(masks[ch], poly, roi, resolution, xs, ys)

    for cw in graph.crosswalks:
        _fill_polygon(masks[7], np.asarray(cw, dtype=float), roi, resolution, xs, ys)

    return MapRaster(masks.astype(np.float64), roi, resolution)
