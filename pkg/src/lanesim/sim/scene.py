"""Scenario containers: per-actor tracks over ticks plus the light
schedule and provenance. Tracks may start before tick 0 (history) and
use NaN rows for ticks where an actor is absent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..maps import TrafficControl


@dataclass
class ActorTrack:
    actor_id: int
    w: float  # extent along heading
    h: float  # extent across heading
    first_tick: int
    states: np.ndarray  # (T,3) columns x, y, theta; NaN row = absent

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 3)

    @property
    def last_tick(self) -> int:
        return self.first_tick + len(self.states) - 1

    def state_at(self, tick: int):
        """(x, y, w, h, theta) or None when absent/out of range."""
        i = tick - self.first_tick
        if not 0 <= i < len(self.states):
            return None
        row = self.states[i]
        if not np.all(np.isfinite(row)):
            return None
        return np.array([row[0], row[1], self.w, self.h, row[2]])


@dataclass
class Scenario:
    map_id: str
    tick_dt: float
    control: TrafficControl
    tracks: list[ActorTrack]
    provenance: dict = field(default_factory=dict)

    @property
    def first_tick(self) -> int:
        return min((t.first_tick for t in self.tracks), default=0)

    @property
    def last_tick(self) -> int:
        return max((t.last_tick for t in self.tracks), default=0)

    def frame(self, tick: int):
        """(ids, states (M,5)) of the actors present at a tick."""
        ids, states = [], []
        for tr in self.tracks:
            st = tr.state_at(tick)
            if st is not None:
                ids.append(tr.actor_id)
                states.append(st)
        return ids, (np.stack(states) if states else np.zeros((0, 5)))


@dataclass
class InitialScene:
    """History prefix handed to a rollout: 7 frames ending at tick 0."""

    graph: object
    control: TrafficControl
    actor_ids: np.ndarray  # (N,)
    extents: np.ndarray  # (N,2) [w,h]
    history: list  # history_ticks+1 frames of (pos (N,2), theta (N,), mask (N,))

    @property
    def n_actors(self) -> int:
        return len(self.actor_ids)


def initial_from_scenario(scn: Scenario, graph, history_ticks: int) -> InitialScene:
    """Extract the [-H..0] prefix of a scenario as a rollout start.

    Actors must be present at tick 0; earlier absences become masked
    NaN frames."""
    ids, ext = [], []
    for tr in scn.tracks:
        if tr.state_at(0) is not None:
            ids.append(tr.actor_id)
            ext.append((tr.w, tr.h))
    ids = np.asarray(ids)
    ext = np.asarray(ext, dtype=float).reshape(-1, 2)
    frames = []
    for tick in range(-history_ticks, 1):
        pos = np.full((len(ids), 2), np.nan)
        theta = np.full(len(ids), np.nan)
        mask = np.zeros(len(ids), dtype=bool)
        for row, aid in enumerate(ids):
            tr = next(t for t in scn.tracks if t.actor_id == aid)
            st = tr.state_at(tick)
            if st is not None:
                pos[row] = st[:2]
                theta[row] = st[4]
                mask[row] = True
        frames.append((pos, theta, mask))
    return InitialScene(graph, scn.control.copy(), ids, ext, frames)
