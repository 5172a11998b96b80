"""Evaluation metrics against independent oracles."""

import numpy as np
import pytest

from lanesim.maps import LaneGraph, LaneSegment, TrafficControl, procedural_map
from lanesim.metrics import (
    DrivableCache,
    EvalReport,
    box_iou,
    evaluate_samples,
    format_table,
    masd,
    scenario_distances,
    scr,
    trv,
)
from lanesim.sim.scene import ActorTrack, Scenario

RNG = np.random.default_rng(53)


def mc_iou(a, b, n=2**20, rng=None, seed=0):
    """Area-sampling IoU oracle over the union bounding box (scrambled
    Sobol points keep the estimator error well below 1e-3 at 2^20)."""
    from scipy.stats import qmc

    corners = np.concatenate([_corners(a), _corners(b)])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    pts = lo + qmc.Sobol(2, scramble=True, seed=seed).random(n) * (hi - lo)
    ina = _inside(a, pts)
    inb = _inside(b, pts)
    inter = np.mean(ina & inb)
    union = np.mean(ina | inb)
    return 0.0 if union == 0 else inter / union


def _corners(s):
    from lanesim.maps.geometry import box_corners

    return box_corners(*s)


def _inside(s, pts):
    x, y, w, h, th = s
    c, si = np.cos(th), np.sin(th)
    dx, dy = pts[:, 0] - x, pts[:, 1] - y
    u = c * dx + si * dy
    v = -si * dx + c * dy
    return (np.abs(u) <= w / 2) & (np.abs(v) <= h / 2)


def track(aid, states, first_tick=0, w=4.0, h=2.0):
    return ActorTrack(aid, w, h, first_tick, np.asarray(states, dtype=float))


def scenario(tracks, map_id="m", control=None):
    return Scenario(map_id, 0.5, control or TrafficControl([]), tracks, {})


def straight_x(x0, speed, n, y=0.0):
    return [[x0 + speed * 0.5 * k, y, 0.0] for k in range(n)]


# ------------------------------------------------------------------- box IoU


def test_iou_identical_and_disjoint():
    a = [0.0, 0.0, 4.0, 2.0, 0.7]
    assert box_iou(a, a) == pytest.approx(1.0)
    b = [100.0, 0.0, 4.0, 2.0, 0.0]
    assert box_iou(a, b) == 0.0


def test_iou_unit_squares_third():
    a = [0.0, 0.0, 1.0, 1.0, 0.0]
    b = [0.5, 0.0, 1.0, 1.0, 0.0]
    assert box_iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert abs(box_iou(a, b) - mc_iou(a, b)) < 1e-3


def test_iou_monte_carlo_oracle_random_pairs():
    rng = np.random.default_rng(1)
    for trial in range(100):
        a = [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 5), rng.uniform(1, 3), rng.uniform(-np.pi, np.pi)]
        b = [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 5), rng.uniform(1, 3), rng.uniform(-np.pi, np.pi)]
        exact = box_iou(a, b)
        approx = mc_iou(a, b, seed=trial)
        assert abs(exact - approx) < 1e-3


def test_iou_symmetric_and_rigid_invariant():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 5), rng.uniform(1, 3), rng.uniform(-np.pi, np.pi)]
        b = [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 5), rng.uniform(1, 3), rng.uniform(-np.pi, np.pi)]
        assert box_iou(a, b) == pytest.approx(box_iou(b, a), abs=1e-12)
        ang, tx, ty = rng.uniform(-np.pi, np.pi), rng.uniform(-5, 5), rng.uniform(-5, 5)
        c, s = np.cos(ang), np.sin(ang)

        def xf(st):
            x, y, w, h, th = st
            return [c * x - s * y + tx, s * x + c * y + ty, w, h, th + ang]

        assert box_iou(xf(a), xf(b)) == pytest.approx(box_iou(a, b), abs=1e-9)


def test_iou_rejects_bad_extent():
    with pytest.raises(ValueError):
        box_iou([0, 0, -1, 2, 0], [0, 0, 1, 1, 0])


# ----------------------------------------------------------------------- SCR


def test_scr_no_overlap_zero():
    s = scenario([track(0, straight_x(0, 5, 10)), track(1, straight_x(0, 5, 10, y=10.0))])
    assert scr([s]) == 0.0


def test_scr_two_of_four():
    tracks = [
        track(0, straight_x(0, 0, 10)),
        track(1, straight_x(1.0, 0, 10)),  # overlaps actor 0 everywhere
        track(2, straight_x(0, 0, 10, y=50)),
        track(3, straight_x(0, 0, 10, y=100)),
    ]
    s = scenario(tracks)
    assert scr([s, s, s]) == pytest.approx(50.0)


def test_scr_counts_actor_once():
    # one actor colliding at five ticks still counts once
    a = track(0, straight_x(0, 0, 10))
    b = track(1, [[1.0, 0, 0]] * 5 + [[30.0, 0, 0]] * 5)
    c = track(2, straight_x(0, 0, 10, y=60))
    assert scr([scenario([a, b, c])]) == pytest.approx(100.0 * 2 / 3)


def test_scr_monotone_in_threshold():
    rng = np.random.default_rng(3)
    tracks = [track(i, [[rng.uniform(-4, 4), rng.uniform(-2, 2), rng.uniform(-1, 1)] for _ in range(8)]) for i in range(5)]
    s = scenario(tracks)
    assert scr([s], eps=0.0) >= scr([s], eps=0.1) >= scr([s], eps=0.3)


def test_scr_needs_samples():
    with pytest.raises(ValueError):
        scr([])


# ----------------------------------------------------------------------- TRV


def lane_world():
    seg = LaneSegment(0, np.array([[-30.0, 0.0], [60.0, 0.0]]), 3.5)
    g = LaneGraph("lane", {0: seg}, (-40.0, -20.0, 110.0, 40.0))
    return g


def test_trv_on_lane_zero():
    g = lane_world()
    s = scenario([track(0, straight_x(0, 5, 20))], map_id="lane")
    assert trv([s], g) == 0.0


def test_trv_offroad_counted_parked_excluded():
    g = lane_world()
    drifting = [[k * 2.0, 0.0 + 0.35 * k, 0.1] for k in range(20)]  # veers off the lane
    parked = [[0.0, 15.0, 0.0]] * 20  # never associated: excluded
    s = scenario([track(0, drifting), track(1, parked)], map_id="lane")
    assert trv([s], g) == pytest.approx(100.0)  # 1 violator / 1 evaluated


def test_trv_red_light_cut_counted():
    g, ctl = procedural_map(3, "intersection")
    # eastbound straight-through while its light is red the whole time
    red = TrafficControl([(0, -10, "red"), (1, -10, "green")])
    xs = np.linspace(-30.0, 30.0, 23)
    s = Scenario("i", 0.5, red, [track(0, [[x, -1.75, 0.0] for x in xs])], {})
    assert trv([s], g) == pytest.approx(100.0)
    green = TrafficControl([(0, -10, "green"), (1, -10, "red")])
    s2 = Scenario("i", 0.5, green, [track(0, [[x, -1.75, 0.0] for x in xs])], {})
    assert trv([s2], g) == 0.0


# ----------------------------------------------------------- reconstruction


def test_distances_zero_for_exact_match():
    gt = scenario([track(0, straight_x(0, 6, 17)), track(1, straight_x(3, 5, 17, y=8))])
    out = scenario_distances([gt], gt, label_ticks=16)
    assert out == (0.0, 0.0, 0.0, 0.0)


def test_distances_min_and_mean():
    gt = scenario([track(0, straight_x(0, 6, 17))])
    s1 = scenario([track(0, [[x + 1.0, y, th] for x, y, th in straight_x(0, 6, 17)])])
    s3 = scenario([track(0, [[x + 3.0, y, th] for x, y, th in straight_x(0, 6, 17)])])
    msade, msfde, asade, asfde = scenario_distances([s1, s3], gt, 16)
    assert msade == pytest.approx(1.0)
    assert asade == pytest.approx(2.0)
    assert msfde == pytest.approx(1.0)
    assert asfde == pytest.approx(2.0)


def test_distances_uniform_offset():
    gt = scenario([track(0, straight_x(0, 6, 17))])
    off = scenario([track(0, [[x, y + 1.0, th] for x, y, th in straight_x(0, 6, 17)])])
    msade, msfde, asade, asfde = scenario_distances([off], gt, 16)
    assert msade == msfde == asade == asfde == pytest.approx(1.0)


def test_distances_brute_force_oracle():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n, k, lt = int(rng.integers(1, 5)), int(rng.integers(1, 6)), int(rng.integers(2, 9))
        gt_states = rng.normal(scale=10, size=(n, lt + 1, 2))
        gt = scenario([track(i, np.concatenate([gt_states[i], np.zeros((lt + 1, 1))], axis=1)) for i in range(n)])
        samples = []
        sample_states = rng.normal(scale=10, size=(k, n, lt + 1, 2))
        for s_i in range(k):
            samples.append(
                scenario([track(i, np.concatenate([sample_states[s_i, i], np.zeros((lt + 1, 1))], axis=1)) for i in range(n)])
            )
        got = scenario_distances(samples, gt, lt)
        # brute force recomputation
        ades, fdes = [], []
        for s_i in range(k):
            d = np.linalg.norm(sample_states[s_i, :, 1:] - gt_states[:, 1:], axis=2)
            ades.append(d.mean())
            fdes.append(d[:, -1].mean())
        expect = (min(ades), min(fdes), np.mean(ades), np.mean(fdes))
        assert np.allclose(got, expect, atol=1e-9)


def test_distances_require_samples():
    gt = scenario([track(0, straight_x(0, 6, 17))])
    with pytest.raises(ValueError):
        scenario_distances([], gt, 16)


# ---------------------------------------------------------------------- MASD


def test_masd_identical_zero_and_offset_two():
    g = lane_world()
    base = scenario([track(0, straight_x(0, 5, 20))], map_id="lane")
    assert masd([base, base], g) == pytest.approx(0.0)
    shifted = scenario([track(0, [[x, y + 1.2, th] for x, y, th in straight_x(0, 5, 20)])], map_id="lane")
    two = scenario([track(0, [[x, y - 0.8, th] for x, y, th in straight_x(0, 5, 20)])], map_id="lane")
    got = masd([base, shifted, two], g)
    assert got == pytest.approx(2.0)


def test_masd_excludes_violators_and_undefined():
    g = lane_world()
    base = scenario([track(0, straight_x(0, 5, 20))], map_id="lane")
    offroad = scenario([track(0, [[x, 0.6 * k, th] for k, (x, y, th) in enumerate(straight_x(0, 5, 20))])], map_id="lane")
    # the diverse-but-violating sample cannot win the max
    assert masd([base, base, offroad], g) == pytest.approx(0.0)
    assert masd([base, offroad], g) is None


# -------------------------------------------------------------------- report


def test_report_invariants_and_table():
    rep = EvalReport(scr=1.0, trv=2.0, min_sfde=1.0, min_sade=0.5, mean_sfde=1.5, mean_sade=0.8, masd=2.0)
    table = format_table([("demo", rep)])
    head, row = table.splitlines()
    assert [c.strip() for c in head.split("  ") if c.strip()] == [
        "Model", "SCR_12s (%)", "TRV_12s (%)", "minSFDE (m)", "minSADE (m)",
        "meanSFDE (m)", "meanSADE (m)", "MASD_12s (m)",
    ]
    assert "demo" in row
    with pytest.raises(ValueError):
        EvalReport(scr=1.0, trv=2.0, min_sfde=2.0, min_sade=0.5, mean_sfde=1.5, mean_sade=0.8, masd=None)
    with pytest.raises(ValueError):
        EvalReport(scr=150.0, trv=2.0, min_sfde=1.0, min_sade=0.5, mean_sfde=1.5, mean_sade=0.8, masd=None)


def test_metrics_invariant_to_sample_order():
    g = lane_world()
    gt = scenario([track(0, straight_x(0, 5, 20))], map_id="lane")
    rng = np.random.default_rng(5)
    samples = []
    for _ in range(4):
        jitter = rng.normal(scale=0.5, size=(20, 1))
        states = np.asarray(straight_x(0, 5, 20))
        states[:, 1:2] += jitter
        samples.append(scenario([track(0, states)], map_id="lane"))
    def all_metrics(ss):
        return (scr(ss), trv(ss, g), scenario_distances(ss, gt, 16), masd(ss, g))
    a = all_metrics(samples)
    b = all_metrics(samples[::-1])
    assert a == b


def test_evaluate_samples_aggregates():
    g = lane_world()
    gt = scenario([track(0, straight_x(0, 5, 20))], map_id="lane")
    rep = evaluate_samples([([gt], gt)], lambda r: g, label_ticks=16)
    assert rep.min_sade == 0.0 and rep.scr == 0.0 and rep.n_scenarios == 1
