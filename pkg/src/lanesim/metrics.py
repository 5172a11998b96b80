"""Scenario evaluation metrics.

Collision rate (fraction of actors ever in an above-threshold overlap,
averaged over samples), traffic-rule violation rate (entering cells
outside the reachability-derived drivable area), reconstruction
distances against expert labels over the labeled horizon, and diversity
(largest mean displacement between two rule-compliant samples).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import DRIVABLE_RESOLUTION, drivable_area, lane_associate
from .maps.geometry import box_corners
from .sim.scene import Scenario

IOU_THRESHOLD = 0.1


# ------------------------------------------------------------------ box IoU


def _shoelace(poly) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip_convex(subject, clipper):
    """Sutherland-Hodgman intersection of convex polygons (CCW)."""
    out = list(subject)
    n = len(clipper)
    for i in range(n):
        if not out:
            return []
        a = clipper[i]
        b = clipper[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        inp = out
        out = []
        prev = inp[-1]
        prev_in = ex * (prev[1] - a[1]) - ey * (prev[0] - a[0]) >= 0
        for cur in inp:
            cur_in = ex * (cur[1] - a[1]) - ey * (cur[0] - a[0]) >= 0
            if cur_in != prev_in:
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                denom = ex * dy - ey * dx
                t = (ex * (a[1] - prev[1]) - ey * (a[0] - prev[0])) / denom
                out.append((prev[0] + t * dx, prev[1] + t * dy))
            if cur_in:
                out.append(cur)
            prev, prev_in = cur, cur_in
    return out


def _ccw(poly):
    return poly if _shoelace(poly) >= 0 else poly[::-1]


def box_iou(a, b) -> float:
    """Exact oriented-box intersection over union.

    States are (x, y, w, h, theta) with positive extents."""
    if a[2] <= 0 or a[3] <= 0 or b[2] <= 0 or b[3] <= 0:
        raise ValueError("box extents must be positive")
    # cheap reject: circumscribed circles do not touch
    ra = 0.5 * np.hypot(a[2], a[3])
    rb = 0.5 * np.hypot(b[2], b[3])
    if np.hypot(a[0] - b[0], a[1] - b[1]) > ra + rb:
        return 0.0
    pa = _ccw(box_corners(*a))
    pb = _ccw(box_corners(*b))
    inter = _clip_convex([tuple(p) for p in pa], [tuple(p) for p in pb])
    if len(inter) < 3:
        return 0.0
    ai = abs(_shoelace(np.asarray(inter)))
    union = abs(_shoelace(pa)) + abs(_shoelace(pb)) - ai
    return float(ai / union) if union > 0 else 0.0


# ------------------------------------------------------------------ SCR


def actors_in_collision(scn: Scenario, eps=IOU_THRESHOLD, first_tick=1) -> set[int]:
    """Ids of actors with at least one above-threshold overlap."""
    hit: set[int] = set()
    for tick in range(max(first_tick, scn.first_tick), scn.last_tick + 1):
        ids, states = scn.frame(tick)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                if ids[i] in hit and ids[j] in hit:
                    continue
                if box_iou(states[i], states[j]) > eps:
                    hit.add(ids[i])
                    hit.add(ids[j])
    return hit


def scr(samples: list[Scenario], eps=IOU_THRESHOLD) -> float:
    """Percent of actors in collision, averaged over scenario samples.

    An actor counts at most once no matter how many ticks it spends in
    collision."""
    if not samples:
        raise ValueError("scr needs at least one scenario sample")
    fractions = []
    for scn in samples:
        n = len(scn.tracks)
        fractions.append(len(actors_in_collision(scn, eps)) / n if n else 0.0)
    return 100.0 * float(np.mean(np.sort(fractions)))  # order-independent reduction


# ------------------------------------------------------------------ TRV


class DrivableCache:
    """Per-(start segment, light phase) drivable rasters for one map."""

    def __init__(self, graph, resolution=DRIVABLE_RESOLUTION):
        self.graph = graph
        self.resolution = resolution
        self._cache = {}
        self._intersection = None

    def raster(self, assoc: int, control, tick: int) -> np.ndarray:
        key = (assoc, control.phase_key(self.graph, tick) if control.entries else ())
        hit = self._cache.get(key)
        if hit is None:
            hit = drivable_area(self.graph, control, assoc, tick, resolution=self.resolution)
            self._cache[key] = hit
        return hit

    def intersection_mask(self) -> np.ndarray:
        """Cells covered by intersection-interior lanes (phase free)."""
        if self._intersection is None:
            from .maps.raster import _fill_polygon, _grid

            nh, nw, xs, ys = _grid(self.graph.roi, self.resolution)
            mask = np.zeros((nh, nw), dtype=bool)
            for sid in sorted(self.graph.segments):
                seg = self.graph.segments[sid]
                if seg.in_intersection:
                    _fill_polygon(mask, seg.polygon, self.graph.roi, self.resolution, xs, ys)
            self._intersection = mask
        return self._intersection


def _violates(track, scn, cache: DrivableCache, assoc: int, first_tick=1) -> bool:
    """True when the actor's center enters a non-drivable cell.

    Each new cell is judged against the drivable raster of its entry
    tick's light phase; while the actor stays inside an intersection the
    phase it entered the junction under keeps applying, so a light
    flipping behind it does not retroactively flag the crossing."""
    x0, y0, w, h = cache.graph.roi
    res = cache.resolution
    inter = cache.intersection_mask()
    prev_cell = None
    inside_prev = False
    crossing_tick = None  # tick the latest junction traversal began
    for tick in range(max(first_tick - 1, track.first_tick), track.last_tick + 1):
        st = track.state_at(tick)
        if st is None:
            continue
        col = int(np.floor((st[0] - x0) / res))
        row = int(np.floor((st[1] - y0) / res))
        nh, nw = int(round(h / res)), int(round(w / res))
        if not (0 <= row < nh and 0 <= col < nw):
            prev_cell = None  # outside the mapped region: not evaluated
            inside_prev = False
            continue
        cell = (row, col)
        inside = bool(inter[row, col])
        if inside and not inside_prev:
            crossing_tick = tick  # committed at this phase; applies downstream
        inside_prev = inside
        if cell != prev_cell and tick >= first_tick:
            judge_tick = tick if crossing_tick is None else crossing_tick
            if cache.raster(assoc, scn.control, judge_tick)[row, col] == 0.0:
                return True
        prev_cell = cell
    return False


def violating_actors(scn: Scenario, graph, cache: DrivableCache | None = None) -> tuple[set[int], int]:
    """(violating actor ids, number of evaluated actors). Actors with no
    initial lane association are excluded from evaluation."""
    cache = cache or DrivableCache(graph)
    bad: set[int] = set()
    evaluated = 0
    for tr in scn.tracks:
        st0 = tr.state_at(0)
        if st0 is None:
            continue
        assoc = lane_associate(st0, graph)
        if assoc is None:
            continue
        evaluated += 1
        if _violates(tr, scn, cache, assoc):
            bad.add(tr.actor_id)
    return bad, evaluated


def trv(samples: list[Scenario], graph, cache: DrivableCache | None = None) -> float:
    """Percent of (actor, sample) pairs leaving their drivable area."""
    cache = cache or DrivableCache(graph)
    bad = 0
    total = 0
    for scn in samples:
        b, n = violating_actors(scn, graph, cache)
        bad += len(b)
        total += n
    return 100.0 * bad / total if total else 0.0


# ------------------------------------------------------------- distances


def _positions(scn: Scenario, ids, ticks) -> np.ndarray:
    out = np.full((len(ids), len(ticks), 2), np.nan)
    for i, aid in enumerate(ids):
        tr = next(t for t in scn.tracks if t.actor_id == aid)
        for j, tick in enumerate(ticks):
            st = tr.state_at(tick)
            if st is not None:
                out[i, j] = st[:2]
    return out


def scenario_distances(samples: list[Scenario], gt: Scenario, label_ticks: int):
    """(minSADE, minSFDE, meanSADE, meanSFDE) against expert labels,
    evaluated on ticks 1..label_ticks."""
    if not samples:
        raise ValueError("scenario_distances needs K >= 1 samples")
    ids = sorted(tr.actor_id for tr in gt.tracks)
    ticks = list(range(1, label_ticks + 1))
    ref = _positions(gt, ids, ticks)
    sades, sfdes = [], []
    for scn in samples:
        pos = _positions(scn, ids, ticks)
        d = np.linalg.norm(pos - ref, axis=2)
        sades.append(float(np.nanmean(d)))
        sfdes.append(float(np.nanmean(d[:, -1])))
    return (
        float(np.min(sades)),
        float(np.min(sfdes)),
        float(np.mean(np.sort(sades))),  # order-independent reduction
        float(np.mean(np.sort(sfdes))),
    )


# ------------------------------------------------------------------ MASD


def masd(samples: list[Scenario], graph, cache: DrivableCache | None = None):
    """Mean displacement between the two most distinct rule-compliant
    samples; None when fewer than two samples comply."""
    cache = cache or DrivableCache(graph)
    ok = []
    for scn in samples:
        bad, _ = violating_actors(scn, graph, cache)
        if not bad:
            ok.append(scn)
    if len(ok) < 2:
        return None
    ids = sorted(tr.actor_id for tr in ok[0].tracks)
    ticks = list(range(1, ok[0].last_tick + 1))
    pos = np.stack([_positions(s, ids, ticks) for s in ok])
    best = 0.0
    for a in range(len(ok)):
        for b in range(a + 1, len(ok)):
            d = float(np.nanmean(np.linalg.norm(pos[a] - pos[b], axis=2)))
            best = max(best, d)
    return best


# ------------------------------------------------------------------ report


@dataclass
class EvalReport:
    scr: float
    trv: float
    min_sfde: float
    min_sade: float
    mean_sfde: float
    mean_sade: float
    masd: float | None
    masd_undefined: int = 0
    n_scenarios: int = 0
    per_scenario: list = field(default_factory=list)

    def __post_init__(self):
        if self.min_sade > self.mean_sade + 1e-9 or self.min_sfde > self.mean_sfde + 1e-9:
            raise ValueError("min distance metrics cannot exceed their means")
        if not (0.0 <= self.scr <= 100.0 and 0.0 <= self.trv <= 100.0):
            raise ValueError("rates must lie in [0, 100]")

    def to_dict(self) -> dict:
        return {
            "scr": self.scr,
            "trv": self.trv,
            "min_sfde": self.min_sfde,
            "min_sade": self.min_sade,
            "mean_sfde": self.mean_sfde,
            "mean_sade": self.mean_sade,
            "masd": self.masd,
            "masd_undefined": self.masd_undefined,
            "n_scenarios": self.n_scenarios,
            "per_scenario": self.per_scenario,
        }


def evaluate_samples(per_init: list[tuple[list[Scenario], Scenario]], graph_for, label_ticks=16) -> EvalReport:
    """Aggregate the metric suite over (samples, ground truth) pairs."""
    rows = []
    caches: dict[str, DrivableCache] = {}
    for samples, gt in per_init:
        graph = graph_for(gt)
        cache = caches.setdefault(gt.map_id, DrivableCache(graph))
        msade, msfde, asade, asfde = scenario_distances(samples, gt, label_ticks)
        rows.append(
            {
                "scr": scr(samples),
                "trv": trv(samples, graph, cache),
                "min_sade": msade,
                "min_sfde": msfde,
                "mean_sade": asade,
                "mean_sfde": asfde,
                "masd": masd(samples, graph, cache),
            }
        )
    masds = [r["masd"] for r in rows if r["masd"] is not None]
    return EvalReport(
        scr=float(np.mean([r["scr"] for r in rows])),
        trv=float(np.mean([r["trv"] for r in rows])),
        min_sfde=float(np.mean([r["min_sfde"] for r in rows])),
        min_sade=float(np.mean([r["min_sade"] for r in rows])),
        mean_sfde=float(np.mean([r["mean_sfde"] for r in rows])),
        mean_sade=float(np.mean([r["mean_sade"] for r in rows])),
        masd=float(np.mean(masds)) if masds else None,
        masd_undefined=len(rows) - len(masds),
        n_scenarios=len(rows),
        per_scenario=rows,
    )


TABLE_COLUMNS = [
    ("SCR_12s (%)", "scr"),
    ("TRV_12s (%)", "trv"),
    ("minSFDE (m)", "min_sfde"),
    ("minSADE (m)", "min_sade"),
    ("meanSFDE (m)", "mean_sfde"),
    ("meanSADE (m)", "mean_sade"),
    ("MASD_12s (m)", "masd"),
]


def format_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table, one row per model."""
    headers = ["Model"] + [name for name, _ in TABLE_COLUMNS]
    lines = [headers]
    for name, rep in rows:
        d = rep.to_dict()
        cells = [name]
        for _, key in TABLE_COLUMNS:
            v = d[key]
            cells.append("undef" if v is None else f"{v:.2f}")
        lines.append(cells)
    widths = [max(len(r[i]) for r in lines) for i in range(len(headers))]
    out = []
    for r in lines:
        out.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    return "\n".join(out)
