"""Simulation-time constraint enforcement over decoded joint plans.

Both methods inspect only the first few plan steps (anticipating
collisions a couple of seconds out) and leave the policy weights fixed.
"""

from __future__ import annotations

import numpy as np


def reject_and_resample(ctx, mu, sigma, z0, plans0, rngs, n_per_sample, max_tries=10, check_steps=5):
    """Redraw colliding samples' latents up to max_tries times.

    A sample is accepted as soon as its plan prefix is collision free;
    after the try budget, the minimum-collision draw seen so far is
    returned, never a worse one.
    """
    best_plans = plans0.copy()
    best_z = z0.copy()
    best_loss = ctx.collision(plans0, check_steps)
    pending = np.flatnonzero(best_loss > 0.0)
    tries = 1
    while len(pending) and tries < max_tries:
        rows = np.flatnonzero(np.isin(ctx.groups, pending))
        z_new = best_z.copy()
        for k in pending:
            z_new[k * n_per_sample : (k + 1) * n_per_sample] = (
                mu[k * n_per_sample : (k + 1) * n_per_sample]
                + sigma[k * n_per_sample : (k + 1) * n_per_sample]
                * rngs[k].normal(size=(n_per_sample, mu.shape[1]))
            )
        plans_sub = ctx.decode(z_new, rows=rows)
        cand_plans = best_plans.copy()
        cand_plans[rows] = plans_sub
        cand_loss = ctx.collision(cand_plans, check_steps)
        improved = cand_loss < best_loss
        for k in np.flatnonzero(improved):
            sl = slice(k * n_per_sample, (k + 1) * n_per_sample)
            best_plans[sl] = cand_plans[sl]
            best_z[sl] = z_new[sl]
            best_loss[k] = cand_loss[k]
        pending = np.flatnonzero(best_loss > 0.0)
        tries += 1
    return best_plans, best_z


def latent_optimize(ctx, z0, steps=5, lr=1e-2, check_steps=5, max_halvings=3):
    """Gradient descent on the latents against the collision penalty.

    Per sample, a step that would increase the penalty is halved up to
    max_halvings times and finally skipped, so the penalty never rises.
    """
    z = z0.copy()
    loss, _ = ctx.collision_grad(z, check_steps)
    loss = loss.copy()
    k_samples = ctx.n_samples
    for _ in range(steps):
        if not np.any(loss > 0.0):
            break
        _, grad = ctx.collision_grad(z, check_steps)
        lr_k = np.full(k_samples, lr)
        active = loss > 0.0
        accepted = np.zeros(k_samples, dtype=bool)
        z_next = z.copy()
        for _ in range(max_halvings + 1):
            trial = np.flatnonzero(active & ~accepted)
            if len(trial) == 0:
                break
            z_try = z_next.copy()
            row_lr = lr_k[ctx.groups]
            step_rows = np.isin(ctx.groups, trial)
            z_try[step_rows] = z[step_rows] - row_lr[step_rows, None] * grad[step_rows]
            loss_try = ctx.collision(ctx.decode(z_try), check_steps)
            for k in trial:
                if loss_try[k] <= loss[k] + 1e-12:
                    accepted[k] = True
                    rows_k = ctx.groups == k
                    z_next[rows_k] = z_try[rows_k]
                    loss[k] = loss_try[k]
                else:
                    lr_k[k] *= 0.5
        z = z_next
    return z
