"""Lane graph, traffic-control schedule, and lane association."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo

HEADING_GATE = np.pi / 2  # opposing traffic never associates


class MapError(ValueError):
    pass


@dataclass
class LaneSegment:
    id: int
    centerline: np.ndarray  # (M,2) meters
    width: float
    successors: list[int] = field(default_factory=list)
    left: int | None = None
    right: int | None = None
    speed_limit: float = 14.0
    light: int | None = None  # traffic-light binding; stop line at segment end
    in_intersection: bool = False
    turn: str | None = None  # "left" | "right" | None

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=float)
        if self.centerline.ndim != 2 or len(self.centerline) < 2:
            raise MapError(f"segment {self.id}: centerline needs >= 2 points")
        if not np.all(np.isfinite(self.centerline)):
            raise MapError(f"segment {self.id}: non-finite centerline")
        self.length = geo.polyline_length(self.centerline)
        self.polygon = geo.lane_polygon(self.centerline, self.width)

    def pose_at(self, s: float) -> tuple[np.ndarray, float]:
        return geo.point_at_arclength(self.centerline, s)


@dataclass
class LaneGraph:
    map_id: str
    segments: dict[int, LaneSegment]
    roi: tuple[float, float, float, float]  # x0, y0, width, height (meters)
    crosswalks: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        for seg in self.segments.values():
            for ref in list(seg.successors) + [seg.left, seg.right]:
                if ref is not None and ref not in self.segments:
                    raise MapError(f"segment {seg.id} references missing segment {ref}")

    @property
    def light_ids(self) -> list[int]:
        return sorted({s.light for s in self.segments.values() if s.light is not None})

    def neighbors(self, seg_id: int) -> list[int]:
        seg = self.segments[seg_id]
        return [n for n in (seg.left, seg.right) if n is not None]


@dataclass
class TrafficControl:
    """Piecewise-constant light states: (light id, tick, 'green'|'red')."""

    entries: list[tuple[int, int, str]] = field(default_factory=list)

    def __post_init__(self):
        for lid, tick, state in self.entries:
            if state not in ("green", "red"):
                raise MapError(f"light {lid}: unknown state {state!r}")
        self.entries.sort(key=lambda e: (e[0], e[1]))

    def state_at(self, light_id: int, tick: int) -> str:
        state = None
        for lid, t, s in self.entries:
            if lid == light_id and t <= tick:
                state = s
        if state is None:
            raise MapError(f"light {light_id} has no state at tick {tick}")
        return state

    def set_state(self, light_id: int, tick: int, state: str):
        if state not in ("green", "red"):
            raise MapError(f"unknown light state {state!r}")
        self.entries.append((light_id, tick, state))
        self.entries.sort(key=lambda e: (e[0], e[1]))

    def phase_key(self, graph: LaneGraph, tick: int) -> tuple:
        return tuple((lid, self.state_at(lid, tick)) for lid in graph.light_ids)

    def copy(self) -> "TrafficControl":
        return TrafficControl(list(self.entries))


def lane_associate(state, graph: LaneGraph) -> int | None:
    """Segment whose footprint contains the box center, nearest by
    centerline distance, heading within 90 degrees; None otherwise.
    Ties break toward the smallest segment id."""
    x, y, theta = float(state[0]), float(state[1]), float(state[4])
    best: tuple[float, int] | None = None
    for sid in sorted(graph.segments):
        seg = graph.segments[sid]
        if not geo.points_in_polygon(seg.polygon, np.array([x]), np.array([y]))[0]:
            continue
        _, lateral, heading = geo.project_to_polyline(seg.centerline, (x, y))
        if abs(geo.wrap_angle(theta - heading)) >= HEADING_GATE:
            continue
        key = (abs(lateral), sid)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]
