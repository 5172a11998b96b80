"""Synthetic demonstration corpus.

Heuristic lane-following experts with per-actor sampled parameters are
rolled out on a pool of procedural maps; each record carries 3 s of
history plus 8 s of expert labels at the 2 Hz scenario tick. A fifth of
the scenes are signalized intersections whose lights flip mid-roll.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .idm import IdmActor, IdmWorld, idm_rollout, sample_params
from .maps import LaneGraph, TrafficControl, entry_segments, lane_associate, procedural_map
from .sim.scene import Scenario

HISTORY_TICKS = 6
LABEL_TICKS = 16
TEMPLATE_WEIGHTS = (("straight", 0.30), ("curve", 0.25), ("merge", 0.25), ("intersection", 0.20))


@dataclass
class Corpus:
    seed: int
    maps: dict[str, tuple[LaneGraph, TrafficControl]]
    records: list[Scenario] = field(default_factory=list)

    def graph_for(self, record: Scenario) -> LaneGraph:
        return self.maps[record.map_id][0]

    def split(self, val_fraction=0.2):
        """Deterministic train/val split derived from the corpus seed."""
        order = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(99,))).permutation(
            len(self.records)
        )
        n_val = int(round(len(self.records) * val_fraction))
        val_idx = set(order[:n_val].tolist())
        train = [r for i, r in enumerate(self.records) if i not in val_idx]
        val = [r for i, r in enumerate(self.records) if i in val_idx]
        return train, val


def _chain_from(graph: LaneGraph, start: int, rng: np.random.Generator, min_len=120.0) -> list[int]:
    route = [start]
    total = graph.segments[start].length
    while total < min_len:
        succ = graph.segments[route[-1]].successors
        if not succ:
            break
        nxt = int(rng.choice(succ))
        route.append(nxt)
        total += graph.segments[nxt].length
    return route


def _light_distance(graph: LaneGraph, start: int, s: float, horizon=200.0):
    """Arclength from s on the start chain to the first stop line."""
    sid = start
    base = 0.0
    while base < horizon + s:
        seg = graph.segments[sid]
        if seg.light is not None:
            return base + seg.length - s
        base += seg.length
        straight = [t for t in seg.successors if graph.segments[t].turn is None]
        nxt = straight or seg.successors
        if not nxt:
            return None
        sid = nxt[0]
    return None


def place_actors(
    graph: LaneGraph, n_actors: int, rng: np.random.Generator, single_chain: bool = False
) -> list[IdmActor]:
    """Spawn actors on entry chains with headway-safe spacing."""
    entries = entry_segments(graph)
    if single_chain:
        entries = [int(rng.choice(entries))]
    # place front-to-back per entry chain: cursor holds the rear bumper
    # arclength and speed of the most recently placed (leading) actor
    cursors: dict[int, tuple[float, float]] = {}
    actors = []
    aid = 0
    guard = 0
    while len(actors) < n_actors and guard < n_actors * 8:
        guard += 1
        start = int(rng.choice(entries))
        params = sample_params(rng)
        seg = graph.segments[start]
        v = float(min(rng.uniform(0.4, 0.9) * params.v0, seg.speed_limit * 1.15))
        w = float(rng.uniform(4.2, 5.2))
        h = float(rng.uniform(1.8, 2.2))
        if start not in cursors:
            head = float(rng.uniform(35.0, min(seg.length + 30.0, 60.0)))
            s = head
        else:
            rear, lead_v = cursors[start]
            closing = max(0.0, v - lead_v)
            net = params.min_gap + v * params.time_headway + closing**2 / (2 * params.b) + float(
                rng.uniform(2.0, 12.0)
            )
            s = rear - net - w / 2.0
            if s < 1.0:
                if all(c[0] < 12.0 for c in cursors.values()) and len(cursors) == len(entries):
                    break
                continue
        stop_d = _light_distance(graph, start, s)
        if stop_d is not None:
            # never spawn faster than the approach can brake for a red
            v = min(v, float(np.sqrt(2.0 * params.b * max(stop_d - 8.0, 0.5))))
        cursors[start] = (s - w / 2.0, v)
        actors.append(
            IdmActor(
                actor_id=aid,
                route=[start],
                s=s,
                v=v,
                w=w,
                h=h,
                params=params,
                rng=np.random.default_rng(np.random.SeedSequence(int(rng.integers(2**32)), spawn_key=(aid,))),
            )
        )
        aid += 1
    return actors


def _check_record(scn: Scenario, graph: LaneGraph):
    for tr in scn.tracks:
        if tr.first_tick != -HISTORY_TICKS or len(tr.states) != HISTORY_TICKS + LABEL_TICKS + 1:
            raise AssertionError("record does not span history + labels")
        if not np.all(np.isfinite(tr.states)):
            raise AssertionError("non-finite expert state")
        st0 = tr.state_at(0)
        speed = np.linalg.norm(tr.state_at(1)[:2] - st0[:2]) / scn.tick_dt
        if speed > 0.5 and lane_associate(st0, graph) is None:
            raise AssertionError("moving expert without lane association")


def generate_corpus(n_scenarios: int, seed: int, templates=None) -> Corpus:
    if n_scenarios < 1:
        raise ValueError("need at least one scenario")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    weights = [(t, w) for t, w in TEMPLATE_WEIGHTS if templates is None or t in templates]
    total_w = sum(w for _, w in weights)
    n_maps = max(4, min(48, n_scenarios // 10))
    pool = []
    maps = {}
    for i in range(n_maps):
        r = rng.random() * total_w
        acc = 0.0
        template = weights[-1][0]
        for t, w in weights:
            acc += w
            if r <= acc:
                template = t
                break
        graph, control = procedural_map(seed * 1000 + i, template)
        maps[graph.map_id] = (graph, control)
        pool.append(graph.map_id)

    corpus = Corpus(seed=seed, maps=maps)
    duration = (HISTORY_TICKS + LABEL_TICKS) * 0.5
    for i in range(n_scenarios):
        srng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, i)))
        map_id = pool[int(srng.integers(len(pool)))]
        graph, control = maps[map_id]
        n_actors = int(srng.integers(4, 13))
        # converging chains would force merge races the keep-lane expert
        # cannot negotiate; keep each merge scene on one chain
        actors = place_actors(graph, n_actors, srng, single_chain=map_id.startswith("merge"))
        world = IdmWorld(graph, control.copy(), actors, tick_offset=-HISTORY_TICKS)
        scn = idm_rollout(world, duration, first_tick=HISTORY_TICKS)
        scn.provenance["record"] = i
        _check_record(scn, graph)
        corpus.records.append(scn)
    return corpus
