"""Planner adapters the rollout engine drives.

PolicyPlanner wraps the learned joint policy plus the feature provider
and applies the configured simulation-time constraint (rejection
sampling or latent-space descent) to each tick's joint plan.
"""

from __future__ import annotations

import numpy as np

from ..grad import Value, no_grad
from ..observe import FeatureProvider
from ..policy import JointPolicy, full_edges, plan_headings
from ..collision import collision_loss
from .constraints import latent_optimize, reject_and_resample


class TickContext:
    """Frozen per-tick inputs; decodes plans from latents on demand."""

    def __init__(self, policy: JointPolicy, x: np.ndarray, pos, theta, extents, groups):
        self.policy = policy
        self.x = x
        self.pos = pos
        self.theta = theta
        self.extents = extents
        self.groups = np.asarray(groups)
        self.n_samples = int(self.groups.max()) + 1 if len(self.groups) else 0

    def _edges(self, groups):
        return full_edges(groups)

    def decode(self, z: np.ndarray, rows=None) -> np.ndarray:
        """Plans for all actors (or a row subset) without recording."""
        with no_grad():
            if rows is None:
                x, pos, th, ext, groups = self.x, self.pos, self.theta, self.extents, self.groups
            else:
                x, pos, th = self.x[rows], self.pos[rows], self.theta[rows]
                ext, groups = self.extents[rows], self.groups[rows]
                z = z[rows]
            eu, ev = self._edges(groups)
            geom = self.policy.edge_geometry(pos, th, ext, eu, ev)
            return self.policy.decode(Value(x), Value(z), pos, th, geom, eu, ev).data

    def headings(self, plans: np.ndarray, rows=None) -> np.ndarray:
        pos = self.pos if rows is None else self.pos[rows]
        th = self.theta if rows is None else self.theta[rows]
        with no_grad():
            return plan_headings(Value(plans), Value(pos), Value(th)).data

    def collision(self, plans: np.ndarray, steps: int) -> np.ndarray:
        """Per-sample collision penalty of a plan prefix."""
        with no_grad():
            hd = self.headings(plans)
            return collision_loss(Value(plans), Value(hd), self.extents, self.groups, steps=steps).data

    def collision_grad(self, z: np.ndarray, steps: int):
        """(per-sample loss, dloss/dz) with policy weights left untouched."""
        zv = Value(z)
        eu, ev = self._edges(self.groups)
        geom = self.policy.edge_geometry(self.pos, self.theta, self.extents, eu, ev)
        plans = self.policy.decode(Value(self.x), zv, self.pos, self.theta, geom, eu, ev)
        hd = plan_headings(plans, self.pos, self.theta)
        loss = collision_loss(plans, hd, self.extents, self.groups, steps=steps)
        loss.sum().backward()
        g = np.zeros_like(z) if zv.grad is None else zv.grad
        self.policy.zero_grad()
        return loss.data, g


class PolicyPlanner:
    model_id = "joint-policy"

    def __init__(self, policy: JointPolicy, provider: FeatureProvider, constraint="none",
                 max_tries=10, check_ticks=5, opt_steps=5, opt_lr=1e-2):
        self.policy = policy
        self.provider = provider
        self.constraint = constraint
        self.max_tries = max_tries
        self.check_ticks = check_ticks
        self.opt_steps = opt_steps
        self.opt_lr = opt_lr

    @property
    def plan_horizon(self):
        return self.policy.cfg.plan_horizon

    def context(self, view):
        features, raster = self.provider.features(view.graph, view.control, view.tick)
        with no_grad():
            return self.policy.context(features, raster, view.window).data

    def plan(self, view) -> np.ndarray:
        x = self.context(view)
        pos, theta, ext = view.positions, view.headings, view.extents
        ctx = TickContext(self.policy, x, pos, theta, ext, view.groups)
        n = len(pos) // max(view.n_samples, 1)
        latent = self.policy.cfg.latent_dim
        with no_grad():
            eu, ev = full_edges(view.groups)
            geom = self.policy.edge_geometry(pos, theta, ext, eu, ev)
            params = self.policy.prior(Value(x), geom, eu, ev)
            mu, sigma = params.mean.data, params.std().data
        rngs = [view.rng(k) for k in range(view.n_samples)]
        noise = np.concatenate([rngs[k].normal(size=(n, latent)) for k in range(view.n_samples)])
        z = mu + sigma * noise
        plans = ctx.decode(z)
        if self.constraint == "reject":
            plans, _ = reject_and_resample(
                ctx, mu, sigma, z, plans, rngs, n, max_tries=self.max_tries, check_steps=self.check_ticks
            )
        elif self.constraint == "latent-opt":
            z_opt = latent_optimize(ctx, z, steps=self.opt_steps, lr=self.opt_lr, check_steps=self.check_ticks)
            plans = ctx.decode(z_opt)
        return plans


class ScriptedPlanner:
    """Context-independent planner: waypoint for absolute tick s comes
    from a fixed per-actor table. Exercises engine bookkeeping (kappa
    consistency, determinism) without a learned model."""

    model_id = "scripted"

    def __init__(self, table: np.ndarray, plan_horizon: int):
        self.table = np.asarray(table, dtype=float)  # (rows, total_ticks+1, 2)
        self.plan_horizon = plan_horizon

    def plan(self, view) -> np.ndarray:
        t = view.tick
        steps = [np.minimum(t + 1 + j, self.table.shape[1] - 1) for j in range(self.plan_horizon)]
        return np.stack([self.table[:, s] for s in steps], axis=1)
