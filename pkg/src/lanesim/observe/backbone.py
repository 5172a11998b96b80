"""Global map feature extraction.

A multi-scale conv stack runs once per (map, light-phase) pair; every
scale is resized back to the raster resolution and a two-conv head
produces the shared feature grid that per-actor crops sample from.
"""

from __future__ import annotations

import numpy as np

from ..grad import Value, no_grad, ops
from ..grad.nn import Conv2d, Module
from ..maps import rasterize


class MapBackbone(Module):
    def __init__(self, n_in, cfg, rng):
        self.blocks = [
            Conv2d(n_in if i == 0 else cfg.backbone_channels[i - 1], c, 3, rng)
            for i, c in enumerate(cfg.backbone_channels)
        ]
        head_in = sum(cfg.backbone_channels)
        hc = cfg.backbone_head_channels
        self.head1 = Conv2d(head_in, hc, 3, rng)
        self.head2 = Conv2d(hc, hc, 3, rng)
        self.out_channels = hc

    def __call__(self, raster_channels) -> Value:
        """(C,H,W) raster -> (out_channels,H,W) feature grid."""
        c, h, w = np.shape(raster_channels)
        need = 2 ** (len(self.blocks) - 1)
        if h // need < 1 or w // need < 1:
            raise ValueError(f"raster {h}x{w} too small for {len(self.blocks) - 1} downsamplings")
        x = raster_channels if isinstance(raster_channels, Value) else Value(raster_channels)
        x = ops.reshape(x, (1, c, h, w))
        scales = []
        for i, block in enumerate(self.blocks):
            if i > 0:
                x = ops.max_pool2d(x, 2)
            x = ops.tanh(block(x))
            scales.append(x)
        merged = ops.concat([s if s.data.shape[2:] == (h, w) else ops.resize_bilinear(s, (h, w)) for s in scales], axis=1)
        y = ops.tanh(self.head1(merged))
        y = ops.tanh(self.head2(y))
        return ops.reshape(y, (self.out_channels, h, w))


class FeatureProvider:
    """Computes and caches the per-(map, phase) feature grid.

    With the backbone disabled (desk preset) the raw raster channels are
    the features. Cached grids are plain arrays computed without
    recording; pass grad=True to get a recorded, uncached pass for
    training the backbone.
    """

    def __init__(self, cfg, backbone: MapBackbone | None):
        self.cfg = cfg
        self.backbone = backbone
        self._raster_cache: dict = {}
        self._feature_cache: dict = {}

    def raster(self, graph, control, tick):
        key = (graph.map_id, control.phase_key(graph, tick) if control else ())
        hit = self._raster_cache.get(key)
        if hit is None:
            hit = rasterize(graph, control, resolution=self.cfg.raster_resolution, tick=tick)
            self._raster_cache[key] = hit
        return hit

    def features(self, graph, control, tick, grad=False):
        """Returns (feature array or Value, raster)."""
        ras = self.raster(graph, control, tick)
        if self.backbone is None or not self.cfg.use_backbone:
            return ras.channels, ras
        if grad:
            return self.backbone(ras.channels), ras
        key = (graph.map_id, control.phase_key(graph, tick) if control else ())
        hit = self._feature_cache.get(key)
        if hit is None:
            with no_grad():
                hit = self.backbone(ras.channels).data
            self._feature_cache[key] = hit
        return hit, ras

    def clear(self):
        self._raster_cache.clear()
        self._feature_cache.clear()
