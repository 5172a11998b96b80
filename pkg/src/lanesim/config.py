"""Configuration dataclasses for the policy, the simulator, and training.

`PolicyConfig.default()` carries the published architecture sizes
(15-channel raster at 0.8 m, conv backbone blocks of 8/16/32/64 with a
64-channel head, 4-layer 128-wide history encoder, 192-dim per-actor
context, 10-step plans). `PolicyConfig.desk()` is a reduced preset used
for minutes-scale training runs; it trades width for speed and skips
the global backbone (local crops then sample the raw raster channels).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields


@dataclass
class PolicyConfig:
    raster_resolution: float = 0.8
    use_backbone: bool = True
    backbone_channels: tuple = (8, 16, 32, 64)
    backbone_head_channels: int = 64
    crop_forward: float = 70.0
    crop_back: float = 10.0
    crop_side: float = 20.0
    crop_grid: tuple = (25, 50)  # (lateral cells, longitudinal cells)
    crop_channels: tuple = (32, 32, 64)  # last entry is the map-feature width
    crop_pose_grad: bool = False  # revisit flag: pose gradient through sampling coords
    history_len: int = 7
    history_hidden: int = 128
    history_layers: int = 4
    future_hidden: int = 128
    latent_dim: int = 16
    hidden: int = 128  # interaction-stage width
    message_rounds: int = 1
    plan_horizon: int = 10  # plan steps per decode
    delta_scale: float = 4.0  # meters per unit of raw decoder output
    geom_scale: float = 0.05  # meters -> unit-scale pairwise geometry

    @property
    def map_feature_dim(self) -> int:
        return self.crop_channels[-1]

    @property
    def context_dim(self) -> int:
        return self.map_feature_dim + self.history_hidden

    @classmethod
    def default(cls) -> "PolicyConfig":
        return cls()

    @classmethod
    def desk(cls) -> "PolicyConfig":
        # near-field acuity beats far-field reach at this scale: the crop
        # must resolve a 3.5 m lane laterally or lane keeping cannot be
        # learned, so the desk preset trades crop extent for resolution
        return cls(
            raster_resolution=1.2,
            use_backbone=False,
            crop_forward=30.0,
            crop_back=6.0,
            crop_side=8.0,
            crop_grid=(12, 16),
            crop_channels=(16, 16, 32),
            history_hidden=32,
            history_layers=2,
            future_hidden=32,
            latent_dim=8,
            hidden=48,
        )


@dataclass
class SimConfig:
    tick_dt: float = 0.5
    horizon: float = 12.0  # seconds simulated forward
    history: float = 3.0  # seconds of initial state
    plan_horizon: int = 10  # ticks per decoded plan
    kappa: int = 1  # plan steps committed per inference
    samples: int = 15
    seed: int = 0
    constraint: str = "none"  # none | reject | latent-opt

    def __post_init__(self):
        if not 1 <= self.kappa <= self.plan_horizon:
            raise ValueError(f"kappa={self.kappa} must lie in [1, plan_horizon={self.plan_horizon}]")
        for name, span in (("horizon", self.horizon), ("history", self.history)):
            if abs(span / self.tick_dt - round(span / self.tick_dt)) > 1e-9:
                raise ValueError(f"{name}={span} is not a multiple of the tick {self.tick_dt}")
        if self.constraint not in ("none", "reject", "latent-opt"):
            raise ValueError(f"unknown constraint mode {self.constraint!r}")

    @property
    def n_ticks(self) -> int:
        return int(round(self.horizon / self.tick_dt))

    @property
    def history_ticks(self) -> int:
        return int(round(self.history / self.tick_dt))


@dataclass
class TrainConfig:
    label_horizon: float = 8.0  # seconds of expert labels
    horizon: float = 12.0
    beta: float = 0.5  # KL weight
    huber_delta: float = 1.0
    collision_scale: float = 0.01
    lr: float = 1e-2
    batch_size: int = 2
    epochs: int = 8
    warmup_epochs: int = 1  # teacher-forced epochs before closed-loop unrolling kicks in
    seed: int = 0
    tick_dt: float = 0.5
    plan_horizon: int = 10
    unroll: bool = True  # closed loop: policy consumes its own states
    collision_loss: bool = True
    train_backbone: bool = False
    policy: PolicyConfig = field(default_factory=PolicyConfig.desk)

    def __post_init__(self):
        if self.label_horizon > self.horizon:
            raise ValueError("label_horizon must not exceed horizon")
        if self.beta <= 0 or self.huber_delta <= 0:
            raise ValueError("beta and huber_delta must be positive")

    @property
    def label_ticks(self) -> int:
        return int(round(self.label_horizon / self.tick_dt))

    @property
    def n_ticks(self) -> int:
        return int(round(self.horizon / self.tick_dt))


def config_to_dict(cfg) -> dict:
    return asdict(cfg)


def policy_config_from_dict(d: dict) -> PolicyConfig:
    known = {f.name for f in fields(PolicyConfig)}
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in known}
    return PolicyConfig(**kw)


def train_config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    pol = d.pop("policy", None)
    known = {f.name for f in fields(TrainConfig)}
    kw = {k: v for k, v in d.items() if k in known}
    if pol is not None:
        kw["policy"] = policy_config_from_dict(pol)
    return TrainConfig(**kw)


def load_train_config(path) -> TrainConfig:
    with open(path) as f:
        return train_config_from_dict(json.load(f))
