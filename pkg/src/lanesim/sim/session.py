"""Live interactive simulation session.

A session owns one map, one mutable actor set, and an append-only edit
log. Commands (step, light changes, actor edits, resampling) apply in a
single total order; replaying the log from the initial state reproduces
the live trajectory bit for bit, because all latent noise derives from
logged seeds and tick indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import SimConfig
from ..maps import drivable_area, lane_associate
from .engine import RolloutEnv, SimulationError, headings_for
from .scene import ActorTrack, InitialScene, Scenario

HISTORY_FRAMES = 7


@dataclass
class SessionActor:
    actor_id: int
    w: float
    h: float


@dataclass
class EditLog:
    entries: list = field(default_factory=list)

    def append(self, **entry):
        self.entries.append(entry)


class Session:
    def __init__(self, session_id: str, graph, control, planner, seed: int = 0, log_init=True):
        self.session_id = session_id
        self.graph = graph
        self.control = control
        self.planner = planner
        self.noise_seed = seed
        self.tick = 0
        self.playing = False
        self.actors: list[SessionActor] = []
        self._next_actor_id = 0
        # frames: (pos (N,2), theta (N,), mask (N,)) aligned with actor order
        self.frames = [self._empty_frame() for _ in range(HISTORY_FRAMES)]
        self.trajectory: list = []  # committed (ids, states) per tick
        self.log = EditLog()
        if log_init:
            self.log.append(op="create", map=graph.map_id, seed=seed)

    # ----------------------------------------------------------- bookkeeping

    def _empty_frame(self):
        n = len(self.actors)
        return (np.zeros((n, 2)), np.zeros(n), np.ones(n, dtype=bool))

    @property
    def extents(self) -> np.ndarray:
        return np.array([[a.w, a.h] for a in self.actors]).reshape(-1, 2)

    def _index_of(self, actor_id: int) -> int:
        for i, a in enumerate(self.actors):
            if a.actor_id == actor_id:
                return i
        raise KeyError(f"unknown actor id {actor_id}")

    # ----------------------------------------------------------------- edits

    def set_light(self, light_id: int, state: str, _log=True):
        if light_id not in self.graph.light_ids:
            raise KeyError(f"unknown light id {light_id}")
        self.control.set_state(light_id, self.tick, state)
        if _log:
            self.log.append(op="set_light", light=light_id, state=state)

    def add_actor(self, x, y, theta, w=4.6, h=2.0, actor_id=None, _log=True) -> int:
        if actor_id is None:
            actor_id = self._next_actor_id
        elif any(a.actor_id == actor_id for a in self.actors):
            raise KeyError(f"actor id {actor_id} already exists")
        self._next_actor_id = max(self._next_actor_id, actor_id + 1)
        self.actors.append(SessionActor(int(actor_id), float(w), float(h)))
        # a fresh actor arrives with a stationary synthetic history
        new_frames = []
        for pos, th, mask in self.frames:
            new_frames.append(
                (
                    np.concatenate([pos, [[float(x), float(y)]]]),
                    np.concatenate([th, [float(theta)]]),
                    np.concatenate([mask, [True]]),
                )
            )
        self.frames = new_frames
        if _log:
            self.log.append(op="add_actor", id=int(actor_id), x=float(x), y=float(y), theta=float(theta), w=float(w), h=float(h))
        return int(actor_id)

    def remove_actor(self, actor_id: int, _log=True):
        i = self._index_of(actor_id)
        self.actors.pop(i)
        self.frames = [
            (np.delete(p, i, axis=0), np.delete(t, i), np.delete(m, i)) for p, t, m in self.frames
        ]
        if _log:
            self.log.append(op="remove_actor", id=int(actor_id))

    def modify_actor(self, actor_id: int, x=None, y=None, theta=None, w=None, h=None, _log=True):
        i = self._index_of(actor_id)
        if w is not None:
            self.actors[i].w = float(w)
        if h is not None:
            self.actors[i].h = float(h)
        pos, th, mask = self.frames[-1]
        pos = pos.copy()
        th = th.copy()
        if x is not None:
            pos[i, 0] = float(x)
        if y is not None:
            pos[i, 1] = float(y)
        if theta is not None:
            th[i] = float(theta)
        self.frames[-1] = (pos, th, mask)
        if _log:
            self.log.append(
                op="modify_actor", id=int(actor_id),
                **{k: float(v) for k, v in (("x", x), ("y", y), ("theta", theta), ("w", w), ("h", h)) if v is not None},
            )

    def resample(self, seed: int, _log=True):
        """Fresh latent stream: subsequent ticks draw from this seed."""
        self.noise_seed = int(seed)
        if _log:
            self.log.append(op="resample", seed=int(seed))

    # ---------------------------------------------------------------- ticking

    def step(self, _log=True):
        if self.actors:
            init = InitialScene(
                self.graph, self.control, np.array([a.actor_id for a in self.actors]),
                self.extents, list(self.frames),
            )
            cfg = SimConfig(
                horizon=0.5, history=(HISTORY_FRAMES - 1) * 0.5, plan_horizon=self.planner.plan_horizon,
                kappa=1, samples=1, seed=self.noise_seed,
            )
            env = RolloutEnv(init, cfg, 1)
            env.tick = self.tick  # noise stream and lights follow the session clock
            view = env.view()
            plans = self.planner.plan(view)
            hd = headings_for(plans, view.positions, view.headings)
            if not np.all(np.isfinite(plans[:, 0])):
                raise SimulationError("non-finite decoded state")
            self.frames.append((plans[:, 0].copy(), hd[:, 0].copy(), np.ones(len(self.actors), dtype=bool)))
            self.frames = self.frames[-HISTORY_FRAMES:]
        self.tick += 1
        self.trajectory.append((self.tick, [a.actor_id for a in self.actors], self.frames[-1]))
        if _log:
            self.log.append(op="step")
        return self.snapshot()

    # -------------------------------------------------------------- queries

    def snapshot(self) -> dict:
        pos, th, _ = self.frames[-1]
        return {
            "tick": self.tick,
            "actors": [
                {
                    "id": a.actor_id,
                    "x": float(pos[i, 0]),
                    "y": float(pos[i, 1]),
                    "w": a.w,
                    "h": a.h,
                    "theta": float(th[i]),
                }
                for i, a in enumerate(self.actors)
            ],
            "lights": [
                {"id": lid, "state": self.control.state_at(lid, self.tick)}
                for lid in self.graph.light_ids
            ],
        }

    def drivable_summary(self, resolution=0.8) -> dict:
        """Union drivable raster over the live actors, as row spans."""
        pos, th, _ = self.frames[-1]
        union = None
        for i, a in enumerate(self.actors):
            state = [pos[i, 0], pos[i, 1], a.w, a.h, th[i]]
            assoc = lane_associate(state, self.graph)
            if assoc is None:
                continue
            ras = drivable_area(self.graph, self.control, assoc, self.tick, resolution=resolution)
            union = ras if union is None else np.maximum(union, ras)
        if union is None:
            union = np.zeros((1, 1))
        spans = []
        for r in range(union.shape[0]):
            row = union[r]
            on = np.flatnonzero(np.diff(np.concatenate([[0.0], row, [0.0]])) != 0)
            spans.append([[int(a), int(b)] for a, b in zip(on[::2], on[1::2])])
        return {"resolution": resolution, "roi": list(self.graph.roi), "rows": spans}

    # ---------------------------------------------------------------- replay

    def committed_scenario(self) -> Scenario:
        """The session trajectory as a scenario (live actors only)."""
        states = {a.actor_id: {} for a in self.actors}
        for tick, ids, (pos, th, _) in self.trajectory:
            for i, aid in enumerate(ids):
                if aid in states:
                    states[aid][tick] = (pos[i, 0], pos[i, 1], th[i])
        tracks = []
        last = self.tick
        for a in self.actors:
            arr = np.full((last, 3), np.nan)
            for t, row in states[a.actor_id].items():
                arr[t - 1] = row
            tracks.append(ActorTrack(a.actor_id, a.w, a.h, 1, arr))
        return Scenario(self.graph.map_id, 0.5, self.control.copy(), tracks, {"session": self.session_id})


def replay_session(graph, control_initial, planner, log: EditLog, session_id="replay") -> Session:
    """Re-execute an edit log from the initial state."""
    entries = list(log.entries)
    if not entries or entries[0].get("op") != "create":
        raise ValueError("edit log must begin with the create entry")
    s = Session(session_id, graph, control_initial, planner, seed=entries[0]["seed"], log_init=False)
    for e in entries[1:]:
        op = e["op"]
        if op == "step":
            s.step(_log=False)
        elif op == "set_light":
            s.set_light(e["light"], e["state"], _log=False)
        elif op == "add_actor":
            s.add_actor(e["x"], e["y"], e["theta"], e.get("w", 4.6), e.get("h", 2.0), e["id"], _log=False)
        elif op == "remove_actor":
            s.remove_actor(e["id"], _log=False)
        elif op == "modify_actor":
            s.modify_actor(
                e["id"], e.get("x"), e.get("y"), e.get("theta"), e.get("w"), e.get("h"), _log=False
            )
        elif op == "resample":
            s.resample(e["seed"], _log=False)
        else:
            raise ValueError(f"edit log entry with unknown op {op!r}")
    return s
