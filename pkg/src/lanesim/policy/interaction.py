"""Message passing over the fully connected actor graph.

One round: an edge perceptron reads both endpoint states plus the
pairwise box geometry, messages aggregate per node by feature-wise max
(zero vector for isolated nodes), a GRU cell updates node states, and a
readout perceptron emits per-node outputs. Everything is vectorized
over edges; permutation equivariance follows from the per-row layout.
"""

from __future__ import annotations

import numpy as np

from ..grad import Value, ops
from ..grad.nn import MLP, GRUCell, Module

CORNER_SIGNS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0], [-1.0, 1.0]])
EDGE_GEOM_DIM = 8  # 4 corners x 2 coordinates


def full_edges(groups) -> tuple[np.ndarray, np.ndarray]:
    """All ordered pairs (u, v), u != v, within each group label."""
    groups = np.asarray(groups)
    eu, ev = [], []
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        for v in idx:
            for u in idx:
                if u != v:
                    eu.append(u)
                    ev.append(v)
    return np.asarray(eu, dtype=np.int64), np.asarray(ev, dtype=np.int64)


def relative_box_corners(pos, theta, extents, eu, ev) -> Value:
    """Corners of v's box expressed in u's frame, flattened to (E, 8)."""
    pos = pos if isinstance(pos, Value) else Value(np.asarray(pos, float))
    theta = theta if isinstance(theta, Value) else Value(np.asarray(theta, float))
    pu, pv = pos[eu], pos[ev]
    thu, thv = theta[eu], theta[ev]
    cu, su = ops.cos(thu)[:, None], ops.sin(thu)[:, None]
    cv, sv = ops.cos(thv)[:, None], ops.sin(thv)[:, None]
    ext = np.asarray(extents, float)
    a = CORNER_SIGNS[:, 0][None, :] * (ext[ev, 0:1] / 2.0)  # (E,4) constants
    b = CORNER_SIGNS[:, 1][None, :] * (ext[ev, 1:2] / 2.0)
    wx = pv[:, 0:1] + cv * a - sv * b
    wy = pv[:, 1:2] + sv * a + cv * b
    dx = wx - pu[:, 0:1]
    dy = wy - pu[:, 1:2]
    rx = cu * dx + su * dy
    ry = cu * dy - su * dx
    return ops.reshape(ops.stack([rx, ry], axis=2), (len(eu), EDGE_GEOM_DIM))


class InteractionStage(Module):
    """Edge messages -> max aggregation -> GRU update -> readout."""

    def __init__(self, hidden, out_dim, rng, rounds=1, zero_readout=False):
        self.edge_mlp = MLP([2 * hidden + EDGE_GEOM_DIM, hidden, hidden, hidden], rng)
        self.update = GRUCell(hidden, hidden, rng)
        self.readout = MLP([hidden, hidden, out_dim], rng, zero_last=zero_readout)
        self.rounds = rounds

    def __call__(self, h0: Value, edge_geom: Value | None, eu, ev) -> Value:
        n = h0.data.shape[0]
        h = h0
        for _ in range(self.rounds):
            if len(eu):
                msg_in = ops.concat([h[eu], h[ev], edge_geom], axis=1)
                msgs = self.edge_mlp(msg_in)
                agg = ops.set_max(msgs, ev, n)
            else:
                agg = Value(np.zeros((n, h.data.shape[1])))
            h = self.update(agg, h)
        return self.readout(h)
