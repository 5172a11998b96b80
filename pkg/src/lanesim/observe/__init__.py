"""Differentiable scene observation: global map features computed once
per (map, phase), plus per-tick local crops and motion-history encoding
concatenated into the per-actor context."""

from __future__ import annotations

from ..grad import Value, ops
from .backbone import FeatureProvider, MapBackbone
from .history import HistoryEncoder, HistoryWindow, history_features
from .local import LocalCrop, crop_grid_local

__all__ = [
    "FeatureProvider",
    "HistoryEncoder",
    "HistoryWindow",
    "LocalCrop",
    "MapBackbone",
    "crop_grid_local",
    "history_features",
    "observe_context",
]


def observe_context(crop: LocalCrop, encoder: HistoryEncoder, features, raster, window: HistoryWindow) -> Value:
    """Per-actor context rows [map features | motion features]."""
    n = window.n_actors
    if n == 0:
        import numpy as np

        return Value(np.zeros((0, crop.cfg.crop_channels[-1] + encoder.gru.n_hidden)))
    cur_pos, cur_theta, _ = window.frames[-1]
    x_map = crop(features, raster, cur_pos, cur_theta)
    x_motion = encoder(window)
    if x_map.data.shape[0] != x_motion.data.shape[0]:
        raise ValueError(f"actor count mismatch: {x_map.data.shape[0]} crops vs {x_motion.data.shape[0]} histories")
    return ops.concat([x_map, x_motion], axis=1)
