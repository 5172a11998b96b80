"""Actor motion history encoding.

Each actor carries a sliding window of 7 past states at tick spacing,
with a presence mask; absent entries are stored as NaN and zeroed (with
the mask appended) before entering the recurrent encoder. All state
features are expressed in the actor's current frame, which keeps the
encoding invariant to the global pose of the scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grad import Value, ops
from ..grad.nn import GRU, Module

FRAME_FEATURES = 7  # dx, dy, cos dtheta, sin dtheta, w, h, mask
POS_SCALE = 0.1  # meters -> roughly unit-scale encoder inputs


@dataclass
class HistoryWindow:
    """Oldest-to-current frames of (pos, theta, mask); extents constant.

    pos/theta may be recorded Values (states the policy produced) or
    plain arrays (log history); mask=None means all present.
    """

    frames: list
    extents: np.ndarray  # (N,2) [w,h]

    @property
    def n_actors(self) -> int:
        return self.extents.shape[0]


def _lift(x) -> Value:
    return x if isinstance(x, Value) else Value(np.asarray(x, dtype=float))


def history_features(window: HistoryWindow):
    """Per-step (N, FRAME_FEATURES) inputs, relative to the current pose.

    All frames are transformed in one batched block; the per-step inputs
    are slices of it (keeps the recorded graph small)."""
    n = window.n_actors
    t = len(window.frames)
    cur_pos, cur_theta, cur_mask = window.frames[-1]
    if cur_mask is not None and not np.all(np.asarray(cur_mask, dtype=bool)):
        raise ValueError("current frame must be present for every actor")
    cur_pos, cur_theta = _lift(cur_pos), _lift(cur_theta)
    masks = np.stack(
        [np.ones(n) if m is None else np.asarray(m, dtype=float) for _, _, m in window.frames]
    )  # (T,N)
    lifted_pos, lifted_th = [], []
    for (pos, theta, _), m in zip(window.frames, masks):
        if not isinstance(pos, Value):
            pd = np.asarray(pos, dtype=float)
            td = np.asarray(theta, dtype=float)
            absent = m < 0.5
            if absent.any():
                # NaN sentinels: substitute the current pose, masked out below
                pd = np.where(absent[:, None], cur_pos.data, pd)
                td = np.where(absent, cur_theta.data, td)
            pos, theta = Value(pd), Value(td)
        lifted_pos.append(pos)
        lifted_th.append(theta)
    pos_all = ops.stack(lifted_pos, axis=0)  # (T,N,2)
    th_all = ops.stack(lifted_th, axis=0)  # (T,N)
    c, s = ops.cos(cur_theta), ops.sin(cur_theta)
    dxw = pos_all[:, :, 0] - cur_pos[:, 0]
    dyw = pos_all[:, :, 1] - cur_pos[:, 1]
    dx = (c * dxw + s * dyw) * POS_SCALE
    dy = (c * dyw - s * dxw) * POS_SCALE
    dth = th_all - cur_theta
    wh = np.broadcast_to(window.extents.T[:, None, :], (2, t, n))
    feat = ops.stack([dx, dy, ops.cos(dth), ops.sin(dth), Value(wh[0]), Value(wh[1])], axis=2)
    feat = ops.concat([feat * masks[:, :, None], Value(masks[:, :, None])], axis=2)  # (T,N,7)
    return [feat[k] for k in range(t)]


class HistoryEncoder(Module):
    """Stacked GRU over the 7-frame window; the top layer's final state
    is the per-actor motion feature."""

    def __init__(self, cfg, rng):
        self.gru = GRU(FRAME_FEATURES, cfg.history_hidden, cfg.history_layers, rng)
        self.expected_len = cfg.history_len

    def __call__(self, window: HistoryWindow) -> Value:
        if len(window.frames) != self.expected_len:
            raise ValueError(f"history window must hold {self.expected_len} frames, got {len(window.frames)}")
        return self.gru(history_features(window))
