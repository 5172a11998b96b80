"""Training objectives.

Per simulation tick the loss blends imitation (Huber reconstruction of
expert waypoints plus a beta-weighted KL between recognition and prior
latents, from plans decoded with recognition samples) against the
collision penalty on prior-sampled plans; the blend weight falls
linearly from 1 at t=0 to 0 at the label horizon and stays 0 beyond.
"""

from __future__ import annotations

import numpy as np

from ..collision import collision_loss
from ..grad import GaussianParams, Value, kl_diag_gaussian, ops

__all__ = ["collision_loss", "imitation_loss", "lambda_weight"]


def lambda_weight(t: float, label_horizon: float) -> float:
    """Imitation weight at simulation time t (seconds): 1 at the start,
    0.5 halfway to the label horizon, 0 at and beyond it."""
    if label_horizon <= 0:
        raise ValueError("label horizon must be positive")
    if t < 0:
        raise ValueError("time must be non-negative")
    return float(np.clip((label_horizon - t) / label_horizon, 0.0, 1.0))


def imitation_loss(plans: Value, gt, gt_mask, q: GaussianParams, p: GaussianParams, beta: float, delta: float):
    """(total, recon, kl) for one tick.

    plans: (N,P,2) recognition-decoded plans; gt: (N,P,2) expert
    waypoints, NaN-free wherever gt_mask is set (the caller truncates
    steps beyond the label horizon via the mask)."""
    gt = np.asarray(gt, dtype=float)
    n = max(plans.data.shape[0], 1)
    mask = np.ones(gt.shape[:2]) if gt_mask is None else np.asarray(gt_mask, dtype=float)
    if np.any(~np.isfinite(gt) & (mask[:, :, None] > 0)):
        raise ValueError("expert waypoints missing inside the masked horizon")
    resid = (plans - np.where(mask[:, :, None] > 0, gt, 0.0)) * mask[:, :, None]
    recon = ops.huber(resid, delta).sum() / float(n)
    kl = kl_diag_gaussian(q, p)
    return recon + beta * kl, recon, kl
