"""Per-actor rotated map crops.

Each actor samples the shared feature grid on a fixed grid in its own
frame (ahead/behind/side extents from the config), then a small conv
stack and a spatial max-pool produce the per-actor map feature vector.
Sampling coordinates are detached from the pose by default so position
gradients do not flow through the crop (crop_pose_grad revisits this).
"""

from __future__ import annotations

import numpy as np

from ..grad import Value, ops
from ..grad.nn import Conv2d, Module


def crop_grid_local(cfg) -> np.ndarray:
    """(P,2) [u,v] cell-center offsets in the actor frame (u forward)."""
    gh, gw = cfg.crop_grid
    span_u = cfg.crop_forward + cfg.crop_back
    span_v = 2.0 * cfg.crop_side
    u = -cfg.crop_back + (np.arange(gw) + 0.5) * (span_u / gw)
    v = -cfg.crop_side + (np.arange(gh) + 0.5) * (span_v / gh)
    vv, uu = np.meshgrid(v, u, indexing="ij")  # rows vary laterally
    return np.stack([uu.reshape(-1), vv.reshape(-1)], axis=1)


class LocalCrop(Module):
    def __init__(self, n_feat, cfg, rng):
        c1, c2, c3 = cfg.crop_channels
        self.conv1 = Conv2d(n_feat, c1, 3, rng)
        self.conv2 = Conv2d(c1, c2, 3, rng)
        self.conv3 = Conv2d(c2, c3, 3, rng)
        self.cfg = cfg
        self._local = crop_grid_local(cfg)

    def sample(self, features, raster, pos, theta):
        """Bilinear crop: (N,2) poses -> (N, C, gh, gw) patches."""
        cfg = self.cfg
        gh, gw = cfg.crop_grid
        pos_d = pos.data if isinstance(pos, Value) else np.asarray(pos, float)
        th_d = theta.data if isinstance(theta, Value) else np.asarray(theta, float)
        n = pos_d.shape[0]
        c, s = np.cos(th_d), np.sin(th_d)
        u = self._local[:, 0][None, :]
        v = self._local[:, 1][None, :]
        wx = pos_d[:, 0:1] + c[:, None] * u - s[:, None] * v
        wy = pos_d[:, 1:2] + s[:, None] * u + c[:, None] * v
        rows, cols = raster.world_to_cell(wx.reshape(-1), wy.reshape(-1))
        coords = np.stack([rows, cols], axis=1)
        if cfg.crop_pose_grad and isinstance(pos, Value):
            raise NotImplementedError("pose gradients through crop sampling are disabled")
        # cached feature grids stay plain arrays: no gradient is scattered
        # back into a constant map
        vals = ops.bilinear_sample(features, coords)  # (C, N*P)
        nc = (features.data if isinstance(features, Value) else features).shape[0]
        patches = ops.reshape(vals, (nc, n, gh, gw))
        return ops.transpose(patches, (1, 0, 2, 3))

    def __call__(self, features, raster, pos, theta):
        """(N,...) poses -> (N, map_feature_dim) vectors."""
        x = self.sample(features, raster, pos, theta)
        x = ops.tanh(self.conv1(x))
        x = ops.tanh(self.conv2(x))
        x = ops.tanh(self.conv3(x))
        x = ops.max_(x, axis=3)
        x = ops.max_(x, axis=2)
        return x
