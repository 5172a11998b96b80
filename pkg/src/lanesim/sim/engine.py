"""Closed-loop scenario rollout.

K samples with a shared initialization evolve in parallel as one flat
actor batch; each sample draws its noise from an isolated stream keyed
by (seed, sample index, tick), so results do not depend on batch order
and rerunning a seed reproduces every scenario bit for bit. Plans are
committed kappa steps at a time; headings come from plan tangents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diagnostics
from ..config import SimConfig
from ..grad import no_grad
from ..observe import HistoryWindow
from ..policy import plan_headings
from .scene import ActorTrack, InitialScene, Scenario


class SimulationError(RuntimeError):
    pass


def sample_rng(seed: int, sample: int, tick: int) -> np.random.Generator:
    """Independent, reproducible stream per (seed, sample, tick)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(sample, tick)))


@dataclass
class TickView:
    """Everything a planner may look at when planning at one tick."""

    tick: int
    graph: object
    control: object
    window: HistoryWindow
    groups: np.ndarray  # (K*N,) sample index per actor row
    n_samples: int
    seed: int

    def rng(self, sample: int) -> np.random.Generator:
        return sample_rng(self.seed, sample, self.tick)

    @property
    def positions(self) -> np.ndarray:
        return self.window.frames[-1][0]

    @property
    def headings(self) -> np.ndarray:
        return self.window.frames[-1][1]

    @property
    def extents(self) -> np.ndarray:
        return self.window.extents


def commit_steps(plans: np.ndarray, headings: np.ndarray, kappa: int):
    """First kappa plan steps as committed frames; rejects overruns."""
    if kappa > plans.shape[1]:
        raise SimulationError(f"kappa={kappa} exceeds plan horizon {plans.shape[1]}")
    frames = []
    for j in range(kappa):
        frames.append((plans[:, j].copy(), headings[:, j].copy(), np.ones(plans.shape[0], dtype=bool)))
    return frames


def headings_for(plans: np.ndarray, pos: np.ndarray, theta: np.ndarray) -> np.ndarray:
    from ..grad import Value

    with no_grad():
        return plan_headings(Value(plans), Value(pos), Value(theta)).data


class RolloutEnv:
    """Flat K-sample batch over a fixed actor set."""

    def __init__(self, init: InitialScene, config: SimConfig, n_samples: int):
        n = init.n_actors
        self.init = init
        self.config = config
        self.n_samples = n_samples
        self.n_actors = n
        self.groups = np.repeat(np.arange(n_samples), n)
        self.extents = np.tile(init.extents, (n_samples, 1))
        self.frames = [
            (np.tile(p, (n_samples, 1)), np.tile(t, n_samples), np.tile(m, n_samples))
            for p, t, m in init.history
        ]
        if len(self.frames) != config.history_ticks + 1:
            raise SimulationError(
                f"initial history must span {config.history_ticks + 1} frames, got {len(self.frames)}"
            )
        self.tick = 0
        self.aborted = np.full(n_samples, -1, dtype=int)

    def window(self, length=7) -> HistoryWindow:
        return HistoryWindow(self.frames[-length:], self.extents)

    def view(self) -> TickView:
        return TickView(
            tick=self.tick,
            graph=self.init.graph,
            control=self.init.control,
            window=self.window(),
            groups=self.groups,
            n_samples=self.n_samples,
            seed=self.config.seed,
        )

    def commit(self, plans: np.ndarray, headings: np.ndarray, kappa: int):
        """Advance the environment by the first kappa plan steps."""
        prev_pos, prev_th, _ = self.frames[-1]
        for pos, theta, mask in commit_steps(plans, headings, kappa):
            bad_rows = ~(np.isfinite(pos).all(axis=1) & np.isfinite(theta))
            bad_samples = np.unique(self.groups[bad_rows])
            for k in bad_samples:
                if self.aborted[k] < 0:
                    self.aborted[k] = self.tick
                    diagnostics.COUNTERS["aborted_rollouts"] += 1
            frozen = np.isin(self.groups, np.flatnonzero(self.aborted >= 0))
            pos = np.where(frozen[:, None] | bad_rows[:, None], prev_pos, pos)
            theta = np.where(frozen | bad_rows, prev_th, theta)
            self.frames.append((pos, theta, mask))
            prev_pos, prev_th = pos, theta
            self.tick += 1

    def scenarios(self, provenance_base: dict | None = None) -> list[Scenario]:
        h = self.config.history_ticks
        out = []
        for k in range(self.n_samples):
            tracks = []
            for i, aid in enumerate(self.init.actor_ids):
                row = k * self.n_actors + i
                states = np.full((len(self.frames), 3), np.nan)
                for f, (pos, theta, mask) in enumerate(self.frames):
                    if mask[row]:
                        states[f, :2] = pos[row]
                        states[f, 2] = theta[row]
                tracks.append(
                    ActorTrack(int(aid), float(self.extents[row, 0]), float(self.extents[row, 1]), -h, states)
                )
            prov = dict(provenance_base or {})
            prov.update(
                {
                    "seed": self.config.seed,
                    "sample": k,
                    "kappa": self.config.kappa,
                    "constraint": self.config.constraint,
                    "aborted_at": int(self.aborted[k]) if self.aborted[k] >= 0 else None,
                }
            )
            out.append(
                Scenario(
                    map_id=getattr(self.init.graph, "map_id", "unknown"),
                    tick_dt=self.config.tick_dt,
                    control=self.init.control.copy(),
                    tracks=tracks,
                    provenance=prov,
                )
            )
        return out


def rollout(planner, init: InitialScene, config: SimConfig) -> list[Scenario]:
    """Simulate K scenarios from one initialization."""
    env = RolloutEnv(init, config, config.samples)
    if env.n_actors == 0:
        env.frames += [
            (np.zeros((0, 2)), np.zeros(0), np.zeros(0, dtype=bool)) for _ in range(config.n_ticks)
        ]
        env.tick = config.n_ticks
        return env.scenarios({"model": getattr(planner, "model_id", "unknown")})
    while env.tick < config.n_ticks:
        kappa = min(config.kappa, config.n_ticks - env.tick)
        view = env.view()
        plans = planner.plan(view)
        if plans.shape[1] < kappa:
            raise SimulationError(f"planner produced {plans.shape[1]} steps, need {kappa}")
        hd = headings_for(plans, view.positions, view.headings)
        env.commit(plans, hd, kappa)
    return env.scenarios({"model": getattr(planner, "model_id", "unknown")})
