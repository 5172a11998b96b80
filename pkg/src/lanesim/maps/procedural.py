"""Procedural lane-graph templates: straight, curve, intersection, merge.

Deterministic per seed. Intersections carry two alternating lights (one
per axis) with stop lines on the approach lanes; the returned default
schedule flips the pair periodically.
"""

from __future__ import annotations

import numpy as np

from .graph import LaneGraph, LaneSegment, TrafficControl

ROI = (-70.0, -40.0, 140.0, 80.0)
LANE_WIDTH = 3.5
TEMPLATES = ("straight", "curve", "intersection", "merge")


def _chain(points, seg_len=35.0):
    """Split a polyline into consecutive segments of roughly seg_len."""
    pts = np.asarray(points, dtype=float)
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(d)])
    total = cum[-1]
    n_segs = max(1, int(round(total / seg_len)))
    cuts = np.linspace(0.0, total, n_segs + 1)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        ss = np.linspace(a, b, max(2, int(np.ceil((b - a) / 5.0)) + 1))
        seg_pts = np.stack(
            [np.interp(ss, cum, pts[:, 0]), np.interp(ss, cum, pts[:, 1])], axis=1
        )
        out.append(seg_pts)
    return out


class _Builder:
    def __init__(self):
        self.segments: dict[int, LaneSegment] = {}
        self._next = 0

    def add_chain(self, points, width=LANE_WIDTH, seg_len=35.0, **kw) -> list[int]:
        ids = []
        for pts in _chain(points, seg_len):
            sid = self._next
            self._next += 1
            self.segments[sid] = LaneSegment(sid, pts, width, **kw)
            ids.append(sid)
        for a, b in zip(ids[:-1], ids[1:]):
            self.segments[a].successors.append(b)
        return ids

    def link(self, a: int, b: int):
        if b not in self.segments[a].successors:
            self.segments[a].successors.append(b)

    def pair_neighbors(self, lower: list[int], upper: list[int]):
        for a, b in zip(lower, upper):
            self.segments[a].left = b
            self.segments[b].right = a


def _speed(rng):
    return float(rng.choice([6.0, 11.0, 16.0]))


def _straight(rng, b: _Builder):
    speed = _speed(rng)
    y = float(rng.uniform(-8.0, 8.0))
    # extends far past the region of interest so traffic never queues at
    # an artificial end-of-map wall inside the evaluated window
    b.add_chain([(-76.0, y), (300.0, y)], speed_limit=speed)
    return []


def _curve(rng, b: _Builder):
    n_lanes = int(rng.integers(1, 3))  # two-lane curves exercise neighbor links
    speed = _speed(rng)
    radius = float(rng.uniform(60.0, 140.0))
    sign = 1.0 if rng.random() < 0.5 else -1.0
    sweep = min(2.1, 280.0 / radius)
    angles = np.linspace(-0.5, sweep, 70)
    chains = []
    for k in range(n_lanes):
        r = radius - sign * k * LANE_WIDTH
        # arc through the origin, initial heading along +x
        cx, cy = 0.0, sign * radius
        pts = np.stack(
            [cx + r * np.sin(angles) * 1.0, cy - sign * r * np.cos(angles)], axis=1
        )
        chains.append(b.add_chain(pts, speed_limit=speed))
    for lo, hi in zip(chains[:-1], chains[1:]):
        b.pair_neighbors(lo, hi)
    return []


def _turn_arc(p0, h0, p1, h1, n=12):
    """Quadratic Bezier between two poses (enough for in-box turns)."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    d0 = np.array([np.cos(h0), np.sin(h0)])
    d1 = np.array([np.cos(h1), np.sin(h1)])
    denom = d0[0] * d1[1] - d0[1] * d1[0]
    if abs(denom) < 1e-9:
        ctrl = (p0 + p1) / 2
    else:
        t = ((p1[0] - p0[0]) * d1[1] - (p1[1] - p0[1]) * d1[0]) / denom
        ctrl = p0 + t * d0
    u = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - u) ** 2 * p0 + 2 * u * (1 - u) * ctrl + u**2 * p1


def _intersection(rng, b: _Builder):
    half = 10.0
    off = LANE_WIDTH / 2
    speed = _speed(rng)
    reach = 76.0
    # travel directions under right-hand traffic; lane axis offset -off*left
    headings = {"east": 0.0, "north": np.pi / 2, "west": np.pi, "south": -np.pi / 2}
    lights = {"east": 0, "west": 0, "north": 1, "south": 1}
    frames = {}
    approach: dict[str, list[int]] = {}
    exit_ids: dict[str, list[int]] = {}
    for d, h in headings.items():
        fwd = np.array([np.cos(h), np.sin(h)])
        left = np.array([-fwd[1], fwd[0]])
        lane = -off * left
        frames[d] = (fwd, left, lane)
        approach[d] = b.add_chain([-reach * fwd + lane, -half * fwd + lane], speed_limit=speed)
        b.segments[approach[d][-1]].light = lights[d]
        exit_ids[d] = b.add_chain([half * fwd + lane, 300.0 * fwd + lane], speed_limit=speed)

    left_of = {"east": "north", "north": "west", "west": "south", "south": "east"}
    right_of = {v: k for k, v in left_of.items()}
    for d, h in headings.items():
        fwd, left, lane = frames[d]
        start = -half * fwd + lane
        for kind, target in (("straight", d), ("right", right_of[d]), ("left", left_of[d])):
            if kind == "right" and rng.random() > 0.7:
                continue
            if kind == "left" and rng.random() > 0.6:
                continue
            th = headings[target]
            tfwd, tleft, tlane = frames[target]
            end = half * tfwd + tlane
            pts = _turn_arc(start, h, end, th)
            ids = b.add_chain(
                pts,
                seg_len=100.0,
                speed_limit=speed,
                in_intersection=True,
                turn=None if kind == "straight" else kind,
            )
            b.link(approach[d][-1], ids[0])
            b.link(ids[-1], exit_ids[target][0])

    # crosswalks across the road just before each box entry
    crosswalks = []
    for d, h in headings.items():
        fwd, left, lane = frames[d]
        center = -(half + 2.0) * fwd
        a = center - left * 2 * LANE_WIDTH
        c = center + left * 2 * LANE_WIDTH
        crosswalks.append(np.stack([a - fwd, c - fwd, c + fwd, a + fwd]))
    return crosswalks


def _merge(rng, b: _Builder):
    speed = _speed(rng)
    y = float(rng.uniform(-4.0, 4.0))
    join_x = float(rng.uniform(-20.0, 0.0))
    main_a = b.add_chain([(-76.0, y), (join_x, y)], speed_limit=speed)
    main_b = b.add_chain([(join_x, y), (300.0, y)], speed_limit=speed)
    b.link(main_a[-1], main_b[0])
    # ramp blends laterally into the main lane with zero end tangents
    dy = float(rng.uniform(10.0, 16.0))
    xs = np.linspace(-76.0, join_x, 28)
    u = (xs - xs[0]) / (xs[-1] - xs[0])
    ys = (y - dy) + dy * (3 * u**2 - 2 * u**3)
    ramp = b.add_chain(np.stack([xs, ys], axis=1), speed_limit=speed)
    b.link(ramp[-1], main_b[0])
    return []


def procedural_map(seed: int, template: str) -> tuple[LaneGraph, TrafficControl]:
    """Build a deterministic lane graph and its default light schedule."""
    if template not in TEMPLATES:
        raise ValueError(f"unknown template {template!r}; expected one of {TEMPLATES}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(TEMPLATES.index(template),)))
    b = _Builder()
    crosswalks = {"straight": _straight, "curve": _curve, "intersection": _intersection, "merge": _merge}[
        template
    ](rng, b)
    graph = LaneGraph(f"{template}-{seed:08d}", b.segments, ROI, crosswalks=crosswalks)
    entries = []
    if graph.light_ids:
        # alternating phases with an all-red clearance interval so traffic
        # committed at a flip can clear the box before the cross flow starts
        period = int(rng.integers(12, 18))
        clearance = 3
        for k, start in enumerate(range(-8 * period, 80, period)):
            gaining, losing = (0, 1) if k % 2 == 0 else (1, 0)
            entries.append((losing, start, "red"))
            entries.append((gaining, start + clearance, "green"))
    control = TrafficControl(entries)
    return graph, control


def entry_segments(graph: LaneGraph) -> list[int]:
    """Segments nothing feeds into: the natural spawn points."""
    has_pred = set()
    for seg in graph.segments.values():
        has_pred.update(seg.successors)
    return sorted(sid for sid in graph.segments if sid not in has_pred)
