"""Closed-loop training: unroll the policy through the differentiable
simulation, blend imitation and collision objectives per tick, and
backpropagate once through the whole unroll.

Recognition-conditioned latents drive the unroll while labels exist;
beyond the label horizon (only relevant when the collision objective is
on) the unroll continues on prior samples alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import diagnostics
from ..config import TrainConfig
from ..corpus import HISTORY_TICKS
from ..grad import Value
from ..observe import FeatureProvider, HistoryWindow
from ..policy import JointPolicy, full_edges, plan_headings
from ..sim.scene import initial_from_scenario
from .adam import Adam
from .losses import collision_loss, imitation_loss, lambda_weight


@dataclass
class ScenarioLoss:
    """Per-tick components of one unroll; `total` is the optimized value."""

    ticks: list = field(default_factory=list)  # (t_sec, lam, recon, kl, collision)
    total: float = 0.0

    def recompute_total(self, beta: float, scale: float) -> float:
        """Rebuild the scalar exactly as the recorded graph summed it."""
        acc = None
        for _, lam, recon, kl, coll in self.ticks:
            term = None
            if recon is not None:
                term = lam * (recon + beta * kl)
            if coll is not None:
                c = (1.0 - lam) * (scale * coll)
                term = c if term is None else term + c
            if term is None:
                term = 0.0
            acc = term if acc is None else acc + term
        return 0.0 if acc is None else acc


class Trainer:
    def __init__(self, records, graph_for, cfg: TrainConfig):
        self.cfg = cfg
        self.records = list(records)
        self.graph_for = graph_for
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(7,)))
        self.policy = JointPolicy(cfg.policy, rng)
        self.provider = FeatureProvider(cfg.policy, self.policy.backbone)
        self.opt = Adam(list(self.policy.named_parameters()), lr=cfg.lr)
        self.history: list[dict] = []
        self.skipped_batches = 0

    # ------------------------------------------------------------- unrolling

    def _expert_arrays(self, record, actor_ids):
        """(label_ticks, N, 2) positions and (label_ticks, N) headings."""
        lt = self.cfg.label_ticks
        pos = np.full((lt + 1, len(actor_ids), 2), np.nan)
        th = np.full((lt + 1, len(actor_ids)), np.nan)
        for i, aid in enumerate(actor_ids):
            tr = next(t for t in record.tracks if t.actor_id == aid)
            for tick in range(0, lt + 1):
                st = tr.state_at(tick)
                if st is not None:
                    pos[tick, i] = st[:2]
                    th[tick, i] = st[4]
        return pos, th

    def unroll(self, record, rng, closed_loop=None) -> tuple[Value, ScenarioLoss]:
        cfg = self.cfg
        closed_loop = cfg.unroll if closed_loop is None else closed_loop
        graph = self.graph_for(record)
        init = initial_from_scenario(record, graph, HISTORY_TICKS)
        n = init.n_actors
        latent = cfg.policy.latent_dim
        p_horizon = cfg.policy.plan_horizon
        label_ticks = cfg.label_ticks
        t_train = cfg.n_ticks if cfg.collision_loss else label_ticks
        gt_pos, gt_th = self._expert_arrays(record, init.actor_ids)
        frames = list(init.history)
        groups = np.zeros(n, dtype=np.int64)
        eu, ev = full_edges(groups)
        report = ScenarioLoss()
        total: Value | None = None
        policy = self.policy
        for t in range(t_train):
            feats, ras = self.provider.features(graph, record.control, t, grad=cfg.train_backbone)
            window = HistoryWindow(frames[-7:], init.extents)
            x = policy.context(feats, ras, window)
            pos_cur, th_cur, _ = frames[-1]
            geom = policy.edge_geometry(pos_cur, th_cur, init.extents, eu, ev)
            lam = lambda_weight(t * cfg.tick_dt, cfg.label_horizon)
            recon_v = kl_v = coll_v = None
            commit_plans = None
            prior_params = policy.prior(x, geom, eu, ev)
            if t < label_ticks:
                fut_ticks = np.arange(t + 1, t + 1 + p_horizon)
                mask = (fut_ticks <= label_ticks).astype(float)[None, :].repeat(n, axis=0)
                idx = np.minimum(fut_ticks, label_ticks)
                gt_fut = np.transpose(gt_pos[idx], (1, 0, 2))
                gt_fut = np.where(mask[:, :, None] > 0, gt_fut, 0.0)
                q = policy.posterior(x, gt_fut, mask, pos_cur, th_cur, geom, eu, ev)
                z_q = policy.sample(q, rng.normal(size=(n, latent)))
                plans_q = policy.decode(x, z_q, pos_cur, th_cur, geom, eu, ev)
                imit_v, recon_v, kl_v = imitation_loss(
                    plans_q, gt_fut, mask, q, prior_params, cfg.beta, cfg.huber_delta
                )
                commit_plans = plans_q
            if cfg.collision_loss:
                z_p = policy.sample(prior_params, rng.normal(size=(n, latent)))
                plans_p = policy.decode(x, z_p, pos_cur, th_cur, geom, eu, ev)
                hd_p = plan_headings(plans_p, pos_cur, th_cur)
                coll_v = collision_loss(plans_p, hd_p, init.extents)[0]
                if t >= label_ticks:
                    commit_plans = plans_p
            # Eq-style blend: lam * (recon + beta*kl) + (1-lam) * scaled collision
            term = None
            if recon_v is not None:
                term = lam * imit_v
            if coll_v is not None:
                scaled = (1.0 - lam) * (cfg.collision_scale * coll_v)
                term = scaled if term is None else term + scaled
            if term is not None:
                total = term if total is None else total + term
            report.ticks.append(
                (
                    t * cfg.tick_dt,
                    lam,
                    None if recon_v is None else float(recon_v.data),
                    None if kl_v is None else float(kl_v.data),
                    None if coll_v is None else float(coll_v.data),
                )
            )
            # advance the environment
            if closed_loop and commit_plans is not None:
                hd1 = plan_headings(commit_plans[:, :1], pos_cur, th_cur)
                frames.append((commit_plans[:, 0], hd1[:, 0], np.ones(n, dtype=bool)))
            else:
                nxt = min(t + 1, label_ticks)
                frames.append((gt_pos[nxt], gt_th[nxt], np.ones(n, dtype=bool)))
        if total is None:
            total = Value(np.zeros(()))
        report.total = float(total.data)
        return total, report

    # ------------------------------------------------------------- training

    def epoch(self, epoch_idx: int) -> dict:
        cfg = self.cfg
        order = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(11, epoch_idx))).permutation(
            len(self.records)
        )
        sums = {"recon": 0.0, "kl": 0.0, "collision": 0.0, "total": 0.0}
        n_ticks_seen = 0
        # unrolled modes spend the first epochs teacher-forced so the
        # policy produces sane states before it starts consuming them
        closed_loop = cfg.unroll and epoch_idx >= cfg.warmup_epochs
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            self.opt.zero_grad()
            ok = True
            for idx in batch:
                rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(3, epoch_idx, int(idx))))
                total, rep = self.unroll(self.records[int(idx)], rng, closed_loop=closed_loop)
                if not np.isfinite(rep.total):
                    ok = False
                    break
                (total * (1.0 / len(batch))).backward()
                sums["total"] += rep.total
                for _, _, recon, kl, coll in rep.ticks:
                    if recon is not None:
                        sums["recon"] += recon
                        sums["kl"] += kl
                    if coll is not None:
                        sums["collision"] += coll
                    n_ticks_seen += 1
            if not ok or not self.opt.grads_finite():
                self.skipped_batches += 1
                diagnostics.COUNTERS["skipped_batches"] += 1
                continue
            self.opt.clip_global_norm(10.0)
            self.opt.step()
        row = {
            "epoch": epoch_idx,
            "recon": sums["recon"] / max(len(order), 1),
            "kl": sums["kl"] / max(len(order), 1),
            "collision": sums["collision"] / max(len(order), 1),
            "total": sums["total"] / max(len(order), 1),
        }
        self.history.append(row)
        return row

    def train(self, log=None):
        for e in range(self.cfg.epochs):
            row = self.epoch(e)
            if log:
                log(row)
        if self.cfg.train_backbone:
            self.provider.clear()
        return self.history

    def loss_csv(self) -> str:
        lines = ["epoch,recon,kl,collision,total"]
        for r in self.history:
            lines.append(f"{r['epoch']},{r['recon']:.6f},{r['kl']:.6f},{r['collision']:.6f},{r['total']:.6f}")
        return "\n".join(lines) + "\n"
