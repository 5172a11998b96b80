"""Policy checkpointing: parameters in the binary checkpoint format,
architecture configuration in the metadata header."""

from __future__ import annotations

import numpy as np

from ..config import PolicyConfig, config_to_dict, policy_config_from_dict
from ..grad import load_checkpoint, save_checkpoint
from .joint import JointPolicy


def save_policy(path, policy: JointPolicy, extra_meta: dict | None = None):
    meta = {"model": "joint-policy", "policy_config": config_to_dict(policy.cfg)}
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, policy.state_arrays(), meta=meta)


def load_policy(path) -> tuple[JointPolicy, dict]:
    arrays, meta = load_checkpoint(path)
    cfg = policy_config_from_dict(meta.get("policy_config", {}))
    policy = JointPolicy(cfg, np.random.default_rng(0))
    policy.load_state_arrays(arrays)
    return policy, meta
