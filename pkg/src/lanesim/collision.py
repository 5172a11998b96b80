"""Differentiable collision penalty via a five-circle body approximation.

Each box is covered by five equal circles of radius h/2 spaced evenly
along its longitudinal axis (coincident when the box is square or
wider than long). A pair of actors incurs, per plan step, a penalty of
1 - d/(r_i + r_j) when their closest circles are within r_i + r_j of
each other and 0 otherwise; per pair, the step sum is capped at 1; the
scene total is averaged over ordered pairs (divided by N^2).
"""

from __future__ import annotations

import numpy as np

from .grad import Value, ops

N_CIRCLES = 5


def circle_layout(w: float, h: float) -> tuple[float, np.ndarray]:
    """(radius, longitudinal offsets) covering a w x h box."""
    if w <= 0 or h <= 0:
        raise ValueError("box extents must be positive")
    r = h / 2.0
    span = max(w - h, 0.0)
    return r, np.linspace(-span / 2.0, span / 2.0, N_CIRCLES)


def circle_centers(state) -> tuple[np.ndarray, float]:
    """Circle centers of one box state (x, y, w, h, theta). Plain numpy,
    used by oracles and metrics."""
    x, y, w, h, theta = (float(v) for v in state)
    r, offs = circle_layout(w, h)
    direction = np.array([np.cos(theta), np.sin(theta)])
    return np.array([x, y]) + offs[:, None] * direction, r


def unordered_pairs(groups: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    eu, ev = [], []
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                eu.append(idx[a])
                ev.append(idx[b])
    return np.asarray(eu, dtype=np.int64), np.asarray(ev, dtype=np.int64)


def collision_loss(plans, headings, extents, groups=None, steps=None):
    """Per-scene collision penalty over the plan horizon.

    plans: (N,P,2) Value; headings: (N,P) Value; extents: (N,2) array;
    groups: (N,) scene labels (single scene if None); steps limits the
    evaluated plan prefix. Returns a Value of shape (n_scenes,);
    gradients flow to the plan waypoints (and headings).
    """
    extents = np.asarray(extents, dtype=float)
    n = extents.shape[0]
    groups = np.zeros(n, dtype=np.int64) if groups is None else np.asarray(groups, dtype=np.int64)
    n_scenes = int(groups.max()) + 1 if n else 1
    sizes = np.bincount(groups, minlength=n_scenes).astype(float)
    if steps is not None:
        plans = plans[:, :steps]
        headings = headings[:, :steps]

    eu, ev = unordered_pairs(groups)
    if len(eu) == 0:
        return Value(np.zeros(n_scenes))

    # circle centers along each plan: (N,P,5) per coordinate
    radii = extents[:, 1] / 2.0
    spans = np.maximum(extents[:, 0] - extents[:, 1], 0.0)
    offs = np.linspace(-0.5, 0.5, N_CIRCLES)[None, :] * spans[:, None]
    c, s = ops.cos(headings), ops.sin(headings)
    cx = plans[:, :, 0:1] + c[:, :, None] * offs[:, None, :]
    cy = plans[:, :, 1:2] + s[:, :, None] * offs[:, None, :]

    cxu, cxv = cx[eu], cx[ev]
    cyu, cyv = cy[eu], cy[ev]
    dx = cxu[:, :, :, None] - cxv[:, :, None, :]
    dy = cyu[:, :, :, None] - cyv[:, :, None, :]
    d2 = dx * dx + dy * dy  # (E,P,5,5)
    dmin = ops.sqrt(ops.min_(ops.min_(d2, axis=3), axis=2) + 1e-12)  # (E,P)
    rsum = (radii[eu] + radii[ev])[:, None]
    per_pair = ops.minimum(ops.relu(1.0 - dmin / rsum).sum(axis=1), 1.0)  # (E,)

    scene_of_pair = groups[eu]
    indicator = np.zeros((n_scenes, len(eu)))
    indicator[scene_of_pair, np.arange(len(eu))] = 2.0 / np.maximum(sizes[scene_of_pair] ** 2, 1.0)
    total = ops.matmul(indicator, ops.reshape(per_pair, (len(eu), 1)))
    return ops.reshape(total, (n_scenes,))
