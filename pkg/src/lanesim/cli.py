"""Command-line interface.

Subcommands: gen-data, train, simulate, eval, ablate, serve. Relative
output paths resolve against LANESIM_DATA_DIR when it is set.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import SimConfig, TrainConfig, config_to_dict, load_train_config
from .corpus import HISTORY_TICKS, LABEL_TICKS, generate_corpus
from .fileio import FormatError, data_dir, read_corpus, read_scenario, write_corpus, write_scenario
from .maps import MapError
from .metrics import EvalReport, evaluate_samples, format_table
from .observe import FeatureProvider
from .policy import load_policy, save_policy
from .sim import PolicyPlanner, SimulationError, initial_from_scenario, rollout
from .train import MODES, Trainer, evaluate_policy, mode_config

USAGE_ERROR, DATA_ERROR, NUMERIC_ERROR = 1, 2, 3


def _resolve(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(data_dir()) / p


def _cmd_gen_data(args) -> int:
    corpus = generate_corpus(args.n, seed=args.seed)
    out = _resolve(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(out, corpus)
    print(f"wrote corpus with {len(corpus.records)} records over {len(corpus.maps)} maps to {out}")
    return 0


def _train_config(args) -> TrainConfig:
    if args.config:
        cfg = load_train_config(_resolve(args.config))
    else:
        cfg = TrainConfig()
    if args.mode:
        cfg = mode_config(args.mode, cfg)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _cmd_train(args) -> int:
    corpus = read_corpus(_resolve(args.corpus))
    cfg = _train_config(args)
    train_records, _ = corpus.split(args.val_fraction)
    trainer = Trainer(train_records, corpus.graph_for, cfg)
    trainer.train(log=lambda row: print(
        f"epoch {row['epoch']}: recon {row['recon']:.2f} kl {row['kl']:.3f} "
        f"collision {row['collision']:.4f} total {row['total']:.2f}",
        flush=True,
    ))
    out = _resolve(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_policy(
        out,
        trainer.policy,
        extra_meta={"mode": args.mode or "custom", "train_config": {
            k: v for k, v in config_to_dict(cfg).items() if k != "policy"
        }},
    )
    csv_path = out.with_suffix(out.suffix + ".loss.csv")
    csv_path.write_text(trainer.loss_csv())
    print(f"saved checkpoint to {out}; loss curve at {csv_path}")
    return 0


def _cmd_simulate(args) -> int:
    corpus = read_corpus(_resolve(args.corpus))
    policy, meta = load_policy(_resolve(args.checkpoint))
    record = corpus.records[args.record]
    graph = corpus.graph_for(record)
    provider = FeatureProvider(policy.cfg, policy.backbone)
    planner = PolicyPlanner(policy, provider, constraint=args.constraint)
    cfg = SimConfig(
        horizon=args.horizon,
        plan_horizon=policy.cfg.plan_horizon,
        kappa=args.kappa,
        samples=args.k,
        seed=args.seed,
        constraint=args.constraint,
    )
    init = initial_from_scenario(record, graph, HISTORY_TICKS)
    outs = rollout(planner, init, cfg)
    out_dir = _resolve(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, scn in enumerate(outs):
        scn.provenance["record"] = args.record
        scn.provenance["model"] = meta.get("mode", "policy")
        write_scenario(out_dir / f"scenario_{args.record:04d}_{k:02d}.json", scn)
    print(f"wrote {len(outs)} scenarios of {cfg.n_ticks} ticks to {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    corpus = read_corpus(_resolve(args.corpus))
    files = sorted(Path(p) for p in args.scenarios)
    by_record: dict[int, list] = {}
    for f in files:
        scn = read_scenario(f)
        rec = scn.provenance.get("record")
        if rec is None:
            raise FormatError(f"{f} lacks provenance.record; cannot match ground truth")
        by_record.setdefault(int(rec), []).append(scn)
    per_init = [(samples, corpus.records[rec]) for rec, samples in sorted(by_record.items())]
    report = evaluate_samples(per_init, corpus.graph_for, label_ticks=LABEL_TICKS)
    name = args.name or "model"
    print(format_table([(name, report)]))
    if args.out:
        out = _resolve(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
        print(f"report written to {out}")
    return 0


def _cmd_ablate(args) -> int:
    corpus = read_corpus(_resolve(args.corpus))
    base = load_train_config(_resolve(args.config)) if args.config else TrainConfig()
    if args.seed is not None:
        base.seed = args.seed
    train_records, val_records = corpus.split(args.val_fraction)
    val_records = val_records[: args.eval_records]
    out_dir = _resolve(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for mode in MODES:
        cfg = mode_config(mode, base)
        trainer = Trainer(train_records, corpus.graph_for, cfg)
        trainer.train(log=lambda row, m=mode: print(f"[{m}] epoch {row['epoch']}: total {row['total']:.2f}", flush=True))
        save_policy(out_dir / f"{mode}.ckpt", trainer.policy, extra_meta={"mode": mode})
        report, _ = evaluate_policy(
            trainer.policy,
            val_records,
            corpus.graph_for,
            provider=trainer.provider,
            samples=args.k,
            seed=base.seed + 1,
        )
        rows.append((mode, report))
        print(format_table(rows), flush=True)
    (out_dir / "ablation.json").write_text(
        json.dumps({m: r.to_dict() for m, r in rows}, indent=1, sort_keys=True) + "\n"
    )
    print(format_table(rows))
    return 0


def _cmd_serve(args) -> int:
    from .service import run_service

    run_service(
        host=args.host,
        ws_port=args.port,
        tcp_port=args.tcp_port,
        corpus_path=_resolve(args.corpus) if args.corpus else None,
        checkpoint_path=_resolve(args.checkpoint) if args.checkpoint else None,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lanesim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic expert corpus")
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_gen_data)

    t = sub.add_parser("train", help="train a policy on a corpus")
    t.add_argument("--corpus", required=True)
    t.add_argument("--config", help="TrainConfig JSON file")
    t.add_argument("--mode", choices=MODES)
    t.add_argument("--seed", type=int)
    t.add_argument("--val-fraction", type=float, default=0.2)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=_cmd_train)

    s = sub.add_parser("simulate", help="sample K scenarios from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--record", type=int, default=0)
    s.add_argument("--k", type=int, default=15)
    s.add_argument("--horizon", type=float, default=12.0)
    s.add_argument("--kappa", type=int, default=1)
    s.add_argument("--constraint", choices=("none", "reject", "latent-opt"), default="none")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_simulate)

    e = sub.add_parser("eval", help="score scenario files against ground truth")
    e.add_argument("--corpus", required=True)
    e.add_argument("--name")
    e.add_argument("--out")
    e.add_argument("scenarios", nargs="+")
    e.set_defaults(fn=_cmd_eval)

    a = sub.add_parser("ablate", help="train and evaluate the mode matrix")
    a.add_argument("--corpus", required=True)
    a.add_argument("--config")
    a.add_argument("--seed", type=int)
    a.add_argument("--k", type=int, default=15)
    a.add_argument("--val-fraction", type=float, default=0.2)
    a.add_argument("--eval-records", type=int, default=50)
    a.add_argument("--out", required=True)
    a.set_defaults(fn=_cmd_ablate)

    v = sub.add_parser("serve", help="run the interactive session service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8700, help="websocket port")
    v.add_argument("--tcp-port", type=int, default=8701, help="line-delimited JSON port")
    v.add_argument("--corpus")
    v.add_argument("--checkpoint")
    v.set_defaults(fn=_cmd_serve)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else USAGE_ERROR
    try:
        return args.fn(args)
    except (FileNotFoundError, FormatError, MapError, KeyError, IndexError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return DATA_ERROR
    except (FloatingPointError, SimulationError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return NUMERIC_ERROR
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
