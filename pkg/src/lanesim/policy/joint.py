"""Joint actor policy with per-actor latents.

All stochasticity lives in a scene latent partitioned across actors;
the decoder is deterministic. A conditioning network maps context (and,
for the recognition path, the encoded expert future) to per-actor
Gaussian parameters; decoding turns context plus a realized latent into
a multi-step plan per actor, in parallel for the whole scene.
"""

from __future__ import annotations

import numpy as np

from ..grad import GaussianParams, Value, ops, reparam_sample
from ..grad.nn import GRU, MLP, Module
from ..maps import CHANNELS
from ..observe import HistoryEncoder, LocalCrop, MapBackbone, observe_context
from .interaction import InteractionStage, relative_box_corners

FUTURE_FEATURES = 3  # dx, dy, mask


class JointPolicy(Module):
    def __init__(self, cfg, rng, n_raster_channels=None):
        n_ch = len(CHANNELS) if n_raster_channels is None else n_raster_channels
        self.cfg = cfg
        self.backbone = MapBackbone(n_ch, cfg, rng) if cfg.use_backbone else None
        feat_dim = cfg.backbone_head_channels if cfg.use_backbone else n_ch
        self.crop = LocalCrop(feat_dim, cfg, rng)
        self.history = HistoryEncoder(cfg, rng)
        d, h, latent = cfg.context_dim, cfg.hidden, cfg.latent_dim
        self.future_gru = GRU(FUTURE_FEATURES, cfg.future_hidden, 1, rng)
        self.prior_in = MLP([d, h, h], rng)
        self.prior_net = InteractionStage(h, 2 * latent, rng, cfg.message_rounds, zero_readout=True)
        self.post_in = MLP([d + cfg.future_hidden, h, h], rng)
        self.post_net = InteractionStage(h, 2 * latent, rng, cfg.message_rounds, zero_readout=True)
        self.dec_in = MLP([d + latent, h, h], rng)
        self.dec_net = InteractionStage(h, cfg.plan_horizon * 2, rng, cfg.message_rounds, zero_readout=True)
        # a tiny, nonzero output head: an exactly-zero head has zero
        # jacobian into everything below it, which would silence the
        # latent pathway (and with it resampling and latent descent)
        final = self.dec_net.readout.layers[-1]
        final.w.data = rng.normal(scale=0.01, size=final.w.data.shape)

    # ------------------------------------------------------------ observation

    def context(self, features, raster, window) -> Value:
        return observe_context(self.crop, self.history, features, raster, window)

    def edge_geometry(self, pos, theta, extents, eu, ev):
        if len(eu) == 0:
            return None
        return relative_box_corners(pos, theta, extents, eu, ev) * self.cfg.geom_scale

    # ---------------------------------------------------------------- latents

    def _gaussian(self, raw: Value) -> GaussianParams:
        latent = self.cfg.latent_dim
        return GaussianParams(raw[:, :latent], raw[:, latent:])

    def prior(self, x: Value, edge_geom, eu, ev) -> GaussianParams:
        if x.data.shape[0] == 0:
            raise ValueError("prior needs a nonempty scene context")
        return self._gaussian(self.prior_net(self.prior_in(x), edge_geom, eu, ev))

    def encode_future(self, gt_future, gt_mask, pos, theta) -> Value:
        """Expert future waypoints -> per-actor feature, current frame."""
        gt = np.asarray(gt_future, dtype=float)
        n, p, _ = gt.shape
        mask = np.ones((n, p)) if gt_mask is None else np.asarray(gt_mask, dtype=float)
        pos_d = pos.data if isinstance(pos, Value) else np.asarray(pos, float)
        th_d = theta.data if isinstance(theta, Value) else np.asarray(theta, float)
        c, s = np.cos(th_d), np.sin(th_d)
        absent = mask < 0.5
        scale = 0.1  # matches the history encoder's meter scaling
        steps = []
        for k in range(p):
            gk = np.where(absent[:, k : k + 1], pos_d, gt[:, k])
            dx = ((gk[:, 0] - pos_d[:, 0]) * c + (gk[:, 1] - pos_d[:, 1]) * s) * scale
            dy = ((gk[:, 1] - pos_d[:, 1]) * c - (gk[:, 0] - pos_d[:, 0]) * s) * scale
            feat = np.stack([dx * mask[:, k], dy * mask[:, k], mask[:, k]], axis=1)
            steps.append(Value(feat))
        return self.future_gru(steps)

    def posterior(self, x: Value, gt_future, gt_mask, pos, theta, edge_geom, eu, ev) -> GaussianParams:
        if gt_future is None:
            raise ValueError("posterior requires expert future states; use the prior instead")
        enc = self.encode_future(gt_future, gt_mask, pos, theta)
        h0 = self.post_in(ops.concat([x, enc], axis=1))
        return self._gaussian(self.post_net(h0, edge_geom, eu, ev))

    @staticmethod
    def sample(params: GaussianParams, noise) -> Value:
        return reparam_sample(params, noise)

    # ---------------------------------------------------------------- decoding

    def decode(self, x: Value, z: Value, pos, theta, edge_geom, eu, ev) -> Value:
        """(N, plan_horizon, 2) global-frame waypoints."""
        n = x.data.shape[0]
        if n == 0:
            return Value(np.zeros((0, self.cfg.plan_horizon, 2)))
        h0 = self.dec_in(ops.concat([x, z], axis=1))
        raw = self.dec_net(h0, edge_geom, eu, ev) * self.cfg.delta_scale
        p = self.cfg.plan_horizon
        deltas = ops.reshape(raw, (n, p, 2))
        local = ops.cumsum(deltas, axis=1)
        pos = pos if isinstance(pos, Value) else Value(np.asarray(pos, float))
        theta = theta if isinstance(theta, Value) else Value(np.asarray(theta, float))
        c, s = ops.cos(theta), ops.sin(theta)
        u, v = local[:, :, 0], local[:, :, 1]
        gx = pos[:, 0:1] + c[:, None] * u - s[:, None] * v
        gy = pos[:, 1:2] + s[:, None] * u + c[:, None] * v
        return ops.stack([gx, gy], axis=2)


def plan_headings(plans: Value, pos, theta, eps=1e-6) -> Value:
    """Headings from the tangent of successive plan segments; a
    zero-length segment keeps the previous heading."""
    pos = pos if isinstance(pos, Value) else Value(np.asarray(pos, float))
    theta = theta if isinstance(theta, Value) else Value(np.asarray(theta, float))
    n, p, _ = plans.data.shape
    prev_xy = pos
    prev_th = theta
    cols = []
    for k in range(p):
        d = plans[:, k] - prev_xy
        degenerate = np.hypot(d.data[:, 0], d.data[:, 1]) < eps
        safe = ops.where(degenerate[:, None], np.ones((n, 2)), d)
        ang = ops.atan2(safe[:, 1], safe[:, 0])
        th = ops.where(degenerate, prev_th, ang)
        cols.append(th)
        prev_xy = plans[:, k]
        prev_th = th
    return ops.stack(cols, axis=1)
