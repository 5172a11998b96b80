"""Intelligent-driver-model baseline and synthetic expert.

Reactive lane keeping: each actor follows its lane chain at 2.5 Hz,
braking for the nearest of (a) the leader on its chain, (b) anything
inside a 30-degree, 10 m forward sector, or (c) a zero-size phantom
parked at the stop line of a red light on its chain. Output states are
resampled to the 2 Hz scenario tick by linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import LaneGraph, TrafficControl
from .maps.geometry import wrap_angle
from .sim.scene import ActorTrack, Scenario

SECTOR_HALF_ANGLE = np.deg2rad(15.0)
SECTOR_RANGE = 10.0
CHAIN_VISIBILITY = 80.0
STOP_LINE_SETBACK = 2.5  # phantom sits before the line so braking overshoot stays behind it


@dataclass
class IdmParams:
    a_max: float = 1.5  # m/s^2, sampled in [0.6, 2.5]
    v0: float = 15.0  # desired speed, sampled in [10, 20]
    b: float = 3.0  # max deceleration
    time_headway: float = 1.5
    min_gap: float = 2.0
    reaction: float = 0.1  # delay, approximated as one buffered observation
    dt: float = 0.4  # 2.5 Hz integration

    def __post_init__(self):
        for name in ("a_max", "v0", "b", "time_headway", "min_gap", "reaction", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be positive")


def sample_params(rng: np.random.Generator) -> IdmParams:
    return IdmParams(a_max=float(rng.uniform(0.6, 2.5)), v0=float(rng.uniform(10.0, 20.0)))


def idm_accel(v: float, dv: float, gap: float, p: IdmParams) -> float:
    """Car-following acceleration; free road is gap=inf. Clamped to
    [-b, a_max]; a non-positive gap is an emergency stop."""
    if gap <= 0.0:
        return -p.b
    s_star = p.min_gap + v * p.time_headway + v * dv / (2.0 * np.sqrt(p.a_max * p.b))
    interaction = 0.0 if np.isinf(gap) else (s_star / gap) ** 2
    a = p.a_max * (1.0 - (v / p.v0) ** 4 - interaction)
    return float(np.clip(a, -p.b, p.a_max))


@dataclass
class IdmActor:
    actor_id: int
    route: list[int]  # lane chain, extended lazily
    s: float  # arclength along the route
    v: float
    w: float
    h: float
    params: IdmParams
    rng: np.random.Generator  # successor choices
    prev_obs: tuple | None = None  # buffered (gap, dv) for the reaction delay
    holding: bool = False
    _cum: np.ndarray = field(default=None, repr=False)


class IdmWorld:
    def __init__(self, graph: LaneGraph, control: TrafficControl, actors: list[IdmActor], tick_dt=0.5, tick_offset=0):
        self.graph = graph
        self.control = control
        self.actors = actors
        self.tick_dt = tick_dt
        self.tick_offset = tick_offset  # scenario tick of the roll's t=0
        for a in actors:
            self._refresh_cum(a)
            self._extend_route(a, CHAIN_VISIBILITY)

    def _refresh_cum(self, actor: IdmActor):
        lengths = [self.graph.segments[sid].length for sid in actor.route]
        actor._cum = np.concatenate([[0.0], np.cumsum(lengths)])

    def _extend_route(self, actor: IdmActor, horizon: float):
        while actor._cum[-1] < actor.s + horizon:
            succ = self.graph.segments[actor.route[-1]].successors
            if not succ:
                return
            # keep-lane behavior: continue straight when the chain offers it
            straight = [s for s in succ if self.graph.segments[s].turn is None]
            pool = straight or succ
            pick = pool[0] if len(pool) == 1 else int(actor.rng.choice(pool))
            actor.route.append(pick)
            self._refresh_cum(actor)

    def locate(self, actor: IdmActor) -> tuple[int, float]:
        """(segment id, arclength within it) at the actor's position."""
        i = int(np.searchsorted(actor._cum, actor.s, side="right") - 1)
        i = min(max(i, 0), len(actor.route) - 1)
        return actor.route[i], actor.s - actor._cum[i]

    def pose(self, actor: IdmActor) -> tuple[np.ndarray, float]:
        sid, s_in = self.locate(actor)
        return self.graph.segments[sid].pose_at(s_in)

    def resolve_headway(self, actor: IdmActor, tick: int):
        """Nearest obstruction as (net gap, closing speed), None if free."""
        self._extend_route(actor, CHAIN_VISIBILITY)
        candidates = []
        pos, heading = self.pose(actor)
        occupancy = {}
        for other in self.actors:
            if other.actor_id != actor.actor_id:
                occupancy.setdefault(self.locate(other)[0], []).append(other)
        # leader along the chain
        i0 = int(np.searchsorted(actor._cum, actor.s, side="right") - 1)
        i0 = min(max(i0, 0), len(actor.route) - 1)
        for i in range(i0, len(actor.route)):
            if actor._cum[i] - actor.s > CHAIN_VISIBILITY:
                break
            for other in occupancy.get(actor.route[i], []):
                _, other_s_in = self.locate(other)
                dist = actor._cum[i] + other_s_in - actor.s
                if dist > 0:
                    gap = dist - actor.w / 2.0 - other.w / 2.0
                    candidates.append((gap, actor.v - other.v))
        # anything inside the forward sector
        for other in self.actors:
            if other.actor_id == actor.actor_id:
                continue
            opos, _ = self.pose(other)
            rel = opos - pos
            dist = float(np.hypot(*rel))
            if dist <= SECTOR_RANGE and abs(wrap_angle(np.arctan2(rel[1], rel[0]) - heading)) <= SECTOR_HALF_ANGLE:
                candidates.append((dist - actor.w / 2.0 - other.w / 2.0, actor.v - other.v))
        # phantom at the first red stop line ahead
        light_tick = tick
        for i in range(i0, len(actor.route)):
            seg = self.graph.segments[actor.route[i]]
            if actor._cum[i + 1] - actor.s > CHAIN_VISIBILITY:
                break
            if seg.light is not None and self.control.state_at(seg.light, light_tick) == "red":
                stop_arc = actor._cum[i + 1] - actor.s
                if stop_arc >= 0.0:
                    candidates.append((stop_arc - actor.w / 2.0 - STOP_LINE_SETBACK, actor.v))
                    break
        # a route end with no continuation is a wall: decelerate into it
        if not self.graph.segments[actor.route[-1]].successors:
            end_arc = actor._cum[-1] - actor.s
            if 0.0 <= end_arc <= CHAIN_VISIBILITY:
                candidates.append((end_arc - actor.w / 2.0, actor.v))
        if not candidates:
            return None
        return min(candidates, key=lambda c: c[0])

    def step(self, t_sec: float):
        tick = int(np.floor(t_sec / self.tick_dt)) + self.tick_offset
        observations = {a.actor_id: self.resolve_headway(a, tick) for a in self.actors}
        for a in self.actors:
            obs = a.prev_obs if a.prev_obs is not None else observations[a.actor_id]
            if a.holding:
                a.v = 0.0
            else:
                if obs is None:
                    acc = idm_accel(a.v, 0.0, np.inf, a.params)
                else:
                    acc = idm_accel(a.v, obs[1], obs[0], a.params)
                a.v = max(0.0, a.v + acc * a.params.dt)
                a.s += a.v * a.params.dt
                self._extend_route(a, CHAIN_VISIBILITY)
                if a.s >= a._cum[-1] and not self.graph.segments[a.route[-1]].successors:
                    a.s = a._cum[-1]
                    a.v = 0.0
                    a.holding = True
            a.prev_obs = observations[a.actor_id]


def idm_rollout(world: IdmWorld, duration: float, first_tick: int = 0) -> Scenario:
    """Roll the world for `duration` seconds and resample to the 2 Hz
    scenario clock; tick 0 of the scenario is `first_tick` ticks after
    the start of the roll."""
    dt = world.actors[0].params.dt if world.actors else 0.4
    n_steps = int(round(duration / dt))
    times = np.arange(n_steps + 1) * dt
    poses = {a.actor_id: [] for a in world.actors}
    arcs = {a.actor_id: [] for a in world.actors}
    speeds = {a.actor_id: [] for a in world.actors}
    for step_i in range(n_steps + 1):
        for a in world.actors:
            p, h = world.pose(a)
            poses[a.actor_id].append((p[0], p[1], h))
            arcs[a.actor_id].append(a.s)
            speeds[a.actor_id].append(a.v)
        if step_i < n_steps:
            world.step(step_i * dt)

    out_ticks = np.arange(0.0, duration + 1e-9, world.tick_dt)
    tracks = []
    for a in world.actors:
        arr = np.asarray(poses[a.actor_id])
        theta_unwrapped = np.unwrap(arr[:, 2])
        states = np.stack(
            [
                np.interp(out_ticks, times, arr[:, 0]),
                np.interp(out_ticks, times, arr[:, 1]),
                wrap_angle(np.interp(out_ticks, times, theta_unwrapped)),
            ],
            axis=1,
        )
        tracks.append(ActorTrack(a.actor_id, a.w, a.h, -first_tick, states))
    scn = Scenario(
        map_id=world.graph.map_id,
        tick_dt=world.tick_dt,
        control=world.control.copy(),
        tracks=tracks,
        provenance={
            "model": "idm",
            "params": {str(a.actor_id): {"a_max": a.params.a_max, "v0": a.params.v0} for a in world.actors},
        },
    )
    scn.idm_internal = {"times": times, "arcs": arcs, "speeds": speeds}  # inspection hook
    return scn
