"""Reachability-based drivable area.

From an actor's initial lane association we traverse successors and
lateral neighbors transitively; any successor edge leaving a segment
whose light shows red at the queried tick is cut. The reachable set is
rasterized to a binary grid (1 = drivable, 0 = violation).
"""

from __future__ import annotations

import numpy as np

from .graph import LaneGraph, TrafficControl
from .raster import DRIVABLE_RESOLUTION, _fill_polygon, _grid


def reachable_segments(graph: LaneGraph, control: TrafficControl | None, start: int, tick: int = 0) -> set[int]:
    """Breadth-first closure over successors and neighbors with
    red-light edges removed."""
    if start not in graph.segments:
        raise KeyError(f"unknown start segment {start}")
    seen = {start}
    queue = [start]
    while queue:
        sid = queue.pop(0)
        seg = graph.segments[sid]
        blocked = (
            seg.light is not None
            and control is not None
            and control.state_at(seg.light, tick) == "red"
        )
        nxt = list(graph.neighbors(sid))
        if not blocked:
            nxt += list(seg.successors)
        for n in nxt:
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return seen


def drivable_area(
    graph: LaneGraph,
    control: TrafficControl | None,
    initial_assoc: int,
    tick: int = 0,
    resolution: float = DRIVABLE_RESOLUTION,
    roi=None,
) -> np.ndarray:
    """Binary (H, W) raster of the reachable lane footprint."""
    roi = tuple(roi if roi is not None else graph.roi)
    nh, nw, xs, ys = _grid(roi, resolution)
    mask = np.zeros((nh, nw), dtype=bool)
    for sid in sorted(reachable_segments(graph, control, initial_assoc, tick)):
        _fill_polygon(mask, graph.segments[sid].polygon, roi, resolution, xs, ys)
    return mask.astype(np.float64)


def cell_of(roi, resolution, x, y):
    """Integer (row, col) of a world point, or None when outside."""
    x0, y0, w, h = roi
    col = int(np.floor((x - x0) / resolution))
    row = int(np.floor((y - y0) / resolution))
    if 0 <= row < int(round(h / resolution)) and 0 <= col < int(round(w / resolution)):
        return row, col
    return None
