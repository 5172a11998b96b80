"""Evaluation driver: K-sample rollouts from held-out initializations,
scored with the metric suite; also reports wall-clock per simulated
second (the relevant figure for multi-step speedups)."""

from __future__ import annotations

import time

import numpy as np

from ..config import SimConfig
from ..corpus import HISTORY_TICKS, LABEL_TICKS
from ..metrics import EvalReport, evaluate_samples
from ..observe import FeatureProvider
from ..sim import PolicyPlanner, rollout
from ..sim.scene import initial_from_scenario


def eval_seed(base_seed: int, record_index: int) -> int:
    return int(np.random.SeedSequence(base_seed, spawn_key=(17, record_index)).generate_state(1)[0])


def evaluate_policy(
    policy,
    records,
    graph_for,
    provider: FeatureProvider | None = None,
    samples: int = 15,
    kappa: int = 1,
    constraint: str = "none",
    seed: int = 0,
    horizon: float = 12.0,
    label_ticks: int = LABEL_TICKS,
) -> tuple[EvalReport, float]:
    """(metric report, wall seconds per simulated second)."""
    provider = provider or FeatureProvider(policy.cfg, policy.backbone)
    planner = PolicyPlanner(policy, provider, constraint=constraint)
    per_init = []
    wall = 0.0
    sim_seconds = 0.0
    for i, rec in enumerate(records):
        graph = graph_for(rec)
        init = initial_from_scenario(rec, graph, HISTORY_TICKS)
        cfg = SimConfig(
            horizon=horizon,
            plan_horizon=policy.cfg.plan_horizon,
            kappa=kappa,
            samples=samples,
            seed=eval_seed(seed, i),
            constraint=constraint,
        )
        t0 = time.perf_counter()
        outs = rollout(planner, init, cfg)
        wall += time.perf_counter() - t0
        sim_seconds += horizon * samples
        per_init.append((outs, rec))
    report = evaluate_samples(per_init, graph_for, label_ticks=label_ticks)
    return report, wall / max(sim_seconds, 1e-9)
