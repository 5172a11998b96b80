"""Lane graph, rasterization, drivable area, and procedural templates."""

import numpy as np
import pytest

from lanesim.maps import (
    LaneGraph,
    LaneSegment,
    TrafficControl,
    drivable_area,
    entry_segments,
    lane_associate,
    map_from_dict,
    map_to_dict,
    procedural_map,
    rasterize,
    reachable_segments,
)
from lanesim.maps.graph import MapError

ROI = (-20.0, -10.0, 40.0, 20.0)


def straight_seg(sid=0, y=0.0, x0=-15.0, x1=15.0, width=3.5, **kw):
    return LaneSegment(sid, np.array([[x0, y], [x1, y]]), width, **kw)


def test_empty_graph_all_zero():
    g = LaneGraph("empty", {}, ROI)
    r = rasterize(g, TrafficControl([]), tick=0)
    assert r.channels.shape[0] == 15
    assert np.all(r.channels == 0.0)


def test_straight_lane_cells_match_polygon_oracle():
    shapely = pytest.importorskip("shapely")
    from shapely.geometry import Point, Polygon

    g = LaneGraph("one", {0: straight_seg()}, ROI)
    r = rasterize(g, None, resolution=0.5)
    poly = Polygon(g.segments[0].polygon)
    road = r.channels[0]
    x0, y0, _, _ = ROI
    for i in range(road.shape[0]):
        for j in range(road.shape[1]):
            cx, cy = x0 + (j + 0.5) * 0.5, y0 + (i + 0.5) * 0.5
            expect = poly.contains(Point(cx, cy))
            got = bool(road[i, j])
            if abs(poly.exterior.distance(Point(cx, cy))) > 0.26:
                assert got == expect, (cx, cy)
    # off-road cells are all zero
    assert road[0, 0] == 0.0 and road[-1, -1] == 0.0


def test_red_light_sets_control_channel():
    seg = straight_seg(light=5)
    g = LaneGraph("lit", {0: seg}, ROI)
    ctl = TrafficControl([(5, 0, "red"), (5, 4, "green")])
    r_red = rasterize(g, ctl, tick=0)
    r_green = rasterize(g, ctl, tick=4)
    assert r_red.channels[14].sum() > 0 and r_red.channels[13].sum() == 0
    assert r_green.channels[13].sum() > 0 and r_green.channels[14].sum() == 0
    # stop line exists in both
    assert r_red.channels[8].sum() > 0


def test_rasterize_deterministic():
    g, c = procedural_map(42, "intersection")
    a = rasterize(g, c, tick=0).channels
    b = rasterize(g, c, tick=0).channels
    assert np.array_equal(a, b)


def test_raster_resolution_consistency_interior():
    g = LaneGraph("one", {0: straight_seg()}, ROI)
    res = 0.8
    coarse = rasterize(g, None, resolution=res).channels[0]
    fine = rasterize(g, None, resolution=res / 2).channels[0]
    poly = g.segments[0].polygon
    ymin, ymax = poly[:, 1].min(), poly[:, 1].max()
    xmin, xmax = poly[:, 0].min(), poly[:, 0].max()
    x0, y0, _, _ = ROI
    for i in range(coarse.shape[0]):
        for j in range(coarse.shape[1]):
            cx, cy = x0 + (j + 0.5) * res, y0 + (i + 0.5) * res
            d = min(abs(cy - ymin), abs(cy - ymax), abs(cx - xmin), abs(cx - xmax))
            if d < 2 * res:
                continue
            fi, fj = int((cy - y0) / (res / 2)), int((cx - x0) / (res / 2))
            assert coarse[i, j] == fine[fi, fj]


# ---------------------------------------------------------------- association


def test_associate_on_lane():
    g = LaneGraph("one", {0: straight_seg()}, ROI)
    assert lane_associate([0.0, 0.0, 4.5, 2.0, 0.0], g) == 0


def test_associate_parking_lot_none():
    g = LaneGraph("one", {0: straight_seg()}, ROI)
    assert lane_associate([0.0, 8.0, 4.5, 2.0, 0.0], g) is None


def test_associate_heading_gate():
    g = LaneGraph("one", {0: straight_seg()}, ROI)
    assert lane_associate([0.0, 0.0, 4.5, 2.0, np.pi], g) is None


def test_associate_tiebreak_smallest_id():
    # two identical overlapping lanes; exhaustive oracle picks either,
    # the tie resolves toward the smaller id
    segs = {1: straight_seg(1), 3: straight_seg(3)}
    g = LaneGraph("two", segs, ROI)
    state = [1.0, 0.3, 4.5, 2.0, 0.0]
    dists = {}
    for sid, seg in segs.items():
        from lanesim.maps.geometry import project_to_polyline

        _, lat, _ = project_to_polyline(seg.centerline, state[:2])
        dists[sid] = abs(lat)
    assert dists[1] == dists[3]
    assert lane_associate(state, g) == 1


def test_associate_rigid_equivariance():
    g0, _ = procedural_map(5, "curve")
    ang, tx, ty = 0.7, 30.0, -12.0
    c, s = np.cos(ang), np.sin(ang)
    rot = np.array([[c, -s], [s, c]])

    def xf(pts):
        return pts @ rot.T + np.array([tx, ty])

    segs = {
        sid: LaneSegment(
            sid,
            xf(seg.centerline),
            seg.width,
            successors=list(seg.successors),
            left=seg.left,
            right=seg.right,
            speed_limit=seg.speed_limit,
            light=seg.light,
            in_intersection=seg.in_intersection,
            turn=seg.turn,
        )
        for sid, seg in g0.segments.items()
    }
    x0, y0, w, h = g0.roi
    g1 = LaneGraph("xf", segs, (x0 - 80, y0 - 80, w + 160, h + 160))
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(25):
        sid = int(rng.choice(list(g0.segments)))
        seg = g0.segments[sid]
        s_arc = rng.uniform(0, seg.length)
        pos, heading = seg.pose_at(s_arc)
        pos = pos + rng.normal(scale=0.4, size=2)
        a0 = lane_associate([pos[0], pos[1], 4.0, 2.0, heading], g0)
        p1 = xf(pos[None])[0]
        a1 = lane_associate([p1[0], p1[1], 4.0, 2.0, heading + ang], g1)
        assert a0 == a1
        hits += a0 is not None
    assert hits > 10


# ------------------------------------------------------------------ drivable


def _mini_graph(edges, n, lights=None):
    segs = {}
    for i in range(n):
        segs[i] = straight_seg(i, y=4.0 * i, light=(lights or {}).get(i))
    for a, b in edges:
        segs[a].successors.append(b)
    return LaneGraph("mini", segs, (-20.0, -10.0, 40.0, 4.0 * n + 20.0))


def test_drivable_single_segment():
    g = _mini_graph([], 1)
    area = drivable_area(g, TrafficControl([]), 0)
    ras = rasterize(g, None, resolution=0.4)
    assert np.array_equal(area > 0, ras.channels[0][: area.shape[0], : area.shape[1]] > 0)


def test_red_light_cuts_successor():
    g = _mini_graph([(0, 1)], 2, lights={0: 9})
    green = reachable_segments(g, TrafficControl([(9, 0, "green")]), 0, 0)
    red = reachable_segments(g, TrafficControl([(9, 0, "red")]), 0, 0)
    assert green == {0, 1}
    assert red == {0}


def test_diamond_matches_graph_search_oracle():
    nx = pytest.importorskip("networkx")
    g = _mini_graph([(0, 1), (0, 2), (1, 3), (2, 3)], 4, lights={1: 7})
    for state in ("green", "red"):
        ctl = TrafficControl([(7, 0, state)])
        got = reachable_segments(g, ctl, 0, 0)
        dig = nx.DiGraph()
        dig.add_nodes_from(g.segments)
        for sid, seg in g.segments.items():
            blocked = seg.light is not None and ctl.state_at(seg.light, 0) == "red"
            if not blocked:
                dig.add_edges_from((sid, t) for t in seg.successors)
            for nb in g.neighbors(sid):
                dig.add_edge(sid, nb)
        expect = {0} | nx.descendants(dig, 0)
        assert got == expect


def test_reachability_monotone_under_green():
    g, c = procedural_map(11, "intersection")
    start = entry_segments(g)[0]
    red_all = TrafficControl([(0, 0, "red"), (1, 0, "red")])
    green_all = TrafficControl([(0, 0, "green"), (1, 0, "green")])
    r_red = reachable_segments(g, red_all, start, 0)
    r_green = reachable_segments(g, green_all, start, 0)
    assert r_red <= r_green
    a_red = drivable_area(g, red_all, start, 0)
    a_green = drivable_area(g, green_all, start, 0)
    assert np.all(a_green >= a_red)


# ---------------------------------------------------------------- procedural


def test_procedural_deterministic():
    for tpl in ("straight", "curve", "intersection", "merge"):
        g1, c1 = procedural_map(123, tpl)
        g2, c2 = procedural_map(123, tpl)
        assert map_to_dict(g1, c1) == map_to_dict(g2, c2)


def test_straight_single_chain():
    g, _ = procedural_map(9, "straight")
    starts = entry_segments(g)
    assert len(starts) == 1
    sid, count = starts[0], 1
    while g.segments[sid].successors:
        sid = g.segments[sid].successors[0]
        count += 1
    assert count == len(g.segments) >= 2


def test_intersection_alternating_lights():
    g, c = procedural_map(21, "intersection")
    approaches = [s for s in g.segments.values() if s.light is not None]
    assert {s.light for s in approaches} == {0, 1}
    # conflicting axes are never green together; each axis gets green time
    greens = {0: [], 1: []}
    for tick in range(0, 40):
        s0, s1 = c.state_at(0, tick), c.state_at(1, tick)
        assert not (s0 == "green" and s1 == "green")
        for lid, s in ((0, s0), (1, s1)):
            if s == "green":
                greens[lid].append(tick)
    assert greens[0] and greens[1]
    # a green phase opens strictly more of the graph than a red one
    ew = next(s.id for s in approaches if s.light == 0)
    ns = next(s.id for s in approaches if s.light == 1)
    for sid, lid in ((ew, 0), (ns, 1)):
        green_tick = greens[lid][0]
        red_tick = next(t for t in range(40) if c.state_at(lid, t) == "red")
        assert len(reachable_segments(g, c, sid, green_tick)) > len(reachable_segments(g, c, sid, red_tick))


# ------------------------------------------------------------------- map io


def test_map_roundtrip_identity(tmp_path):
    g, c = procedural_map(77, "merge")
    doc = map_to_dict(g, c)
    g2, c2 = map_from_dict(doc)
    assert map_to_dict(g2, c2) == doc


def test_map_unknown_field_warns():
    g, c = procedural_map(1, "straight")
    doc = map_to_dict(g, c)
    doc["future_field"] = 1
    with pytest.warns(UserWarning, match="future_field"):
        map_from_dict(doc)


def test_map_bad_refs_rejected():
    seg = straight_seg()
    seg.successors.append(99)
    with pytest.raises(MapError, match="missing segment"):
        LaneGraph("bad", {0: seg}, ROI)


def test_schedule_missing_state_rejected():
    ctl = TrafficControl([(1, 5, "red")])
    with pytest.raises(MapError, match="no state"):
        ctl.state_at(1, 2)
