"""Ablation mode matrix: plan length x closed-loop unrolling x the
collision objective."""

from __future__ import annotations

from dataclasses import replace

from ..config import TrainConfig

MODES = ("M0", "M1", "M2", "M3", "Mstar")

_SETTINGS = {
    "M0": dict(plan_horizon=1, unroll=False, collision_loss=False),
    "M1": dict(plan_horizon=10, unroll=False, collision_loss=False),
    "M2": dict(plan_horizon=1, unroll=True, collision_loss=False),
    "M3": dict(plan_horizon=10, unroll=True, collision_loss=False),
    "Mstar": dict(plan_horizon=10, unroll=True, collision_loss=True),
}


def mode_config(mode: str, base: TrainConfig | None = None) -> TrainConfig:
    if mode not in _SETTINGS:
        raise ValueError(f"unknown ablation mode {mode!r}; expected one of {MODES}")
    base = base or TrainConfig()
    s = _SETTINGS[mode]
    policy = replace(base.policy, plan_horizon=s["plan_horizon"])
    return replace(base, policy=policy, **s)
