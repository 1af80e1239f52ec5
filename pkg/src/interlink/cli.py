"""Experiment command line: sample | train | tune | eval | export.

Configuration is plain ``key=value`` text (later command-line flags win over
the config file).  Exit codes: 0 success, 1 configuration error, 2 data
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import transport
from .data import OverlapSpec, load_domain_pair, load_triplets, sample_domain_pair, save_domain_pair
from .errors import ConfigError, DataError, InterlinkError, NumericalError
from .evaluation import hit_at_10, roc_auc
from .rescal import load_checkpoint
from .training import TrainConfig, fit, refresh_plan

OUTPUT_ROOT_ENV = "INTERLINK_OUTPUT_ROOT"

# name -> (parser, default); mirrors TrainConfig plus tuning ranges.
_CONFIG_KEYS = {
    "d": (int, 100),
    "alpha": (float, 0.0),
    "regularizer": (str, "none"),
    "lambda": (float, 100.0),
    "mu": (float, 0.01),
    "lr": (float, 0.005),
    "batch_size": (int, 300),
    "epochs": (int, 300),
    "patience": (int, 50),
    "warmstart_epochs": (int, 100),
    "seed": (int, 0),
    "eval_metric": (str, "inter_auc"),
    "alpha_min": (float, 0.5),
    "alpha_max": (float, 10.0),
    "lr_grid": (str, "0.01,0.005,0.001,0.0005"),
    "batch_grid": (str, "100,300,500,700"),
}


def _read_config_file(path: str) -> Dict[str, str]:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("["):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def _resolve_config(args: argparse.Namespace) -> Dict[str, object]:
    """defaults <- config file <- explicit command-line flags."""
    resolved = {key: default for key, (_, default) in _CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        for key, raw in _read_config_file(args.config).items():
            parse, _ = _CONFIG_KEYS[key]
            try:
                resolved[key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for key in _CONFIG_KEYS:
        flag = "lam" if key == "lambda" else key
        value = getattr(args, flag, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _train_config(resolved: Dict[str, object]) -> TrainConfig:
    return TrainConfig(
        d=resolved["d"],
        alpha=resolved["alpha"],
        regularizer=resolved["regularizer"],
        lam=resolved["lambda"],
        mu=resolved["mu"],
        lr=resolved["lr"],
        batch_size=resolved["batch_size"],
        epochs=resolved["epochs"],
        patience=resolved["patience"],
        warmstart_epochs=resolved["warmstart_epochs"],
        seed=resolved["seed"],
        eval_metric=resolved["eval_metric"],
    )


def _out_dir(path: str) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        path = os.path.join(root, path)
    os.makedirs(path, exist_ok=True)
    return path


def _refuse_overwrite(out: str, names: List[str], force: bool) -> None:
    existing = [n for n in names if os.path.exists(os.path.join(out, n))]
    if existing and not force:
        raise ConfigError(
            f"output files already exist in {out}: {', '.join(existing)} "
            f"(use --force to overwrite)"
        )


def _write_config_echo(out: str, resolved: Dict[str, object]) -> None:
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as fh:
        for key in sorted(resolved):
            fh.write(f"{key}={resolved[key]}\n")


def cmd_sample(args: argparse.Namespace) -> int:
    entities, predicates, store = load_triplets(args.input)
    spec = OverlapSpec(level=args.overlap, target_size=args.size, seed=args.seed)
    pair = sample_domain_pair(entities, predicates, store, spec)
    out = _out_dir(args.out)
    _refuse_overwrite(out, ["meta.txt"], args.force)
    save_domain_pair(pair, out)
    print(
        f"ent_g1={pair.n1} ent_g2={pair.n2} rel={pair.num_predicates} "
        f"common={len(pair.common)} "
        f"train={len(pair.train1) + len(pair.train2)} "
        f"inter_valid={len(pair.inter_valid)} "
        f"intra_test={len(pair.intra_test)} inter_test={len(pair.inter_test)}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    resolved = _resolve_config(args)
    config = _train_config(resolved)
    config.validate()
    if args.dump_plan and config.regularizer != "wd":
        raise ConfigError("--dump-plan requires the wd regularizer")
    pair = load_domain_pair(args.data)
    out = _out_dir(args.out)
    outputs = ["checkpoint.txt", "train_log.txt", "metrics.tsv", "config.txt"]
    if args.dump_plan:
        outputs.append("plan.tsv")
    _refuse_overwrite(out, outputs, args.force)
    _write_config_echo(out, resolved)

    checkpoint = os.path.join(out, "checkpoint.txt")
    with open(os.path.join(out, "train_log.txt"), "w", encoding="utf-8") as log:
        log.write("# epoch loss1 loss2 reg_value val_metric sinkhorn_iters seconds\n")
        model, report = fit(pair, config, log_stream=log, checkpoint_path=checkpoint)

    with open(os.path.join(out, "metrics.tsv"), "w", encoding="utf-8") as fh:
        fh.write("split\tmetric\tvalue\tn\n")
        fh.write(
            f"inter_valid\t{config.eval_metric}\t{report.best_val_metric:.6f}"
            f"\t{len(pair.inter_valid)}\n"
        )
    if args.dump_plan:
        state = refresh_plan(model, pair, config)
        transport.write_plan_tsv(
            state, pair.vocab1.names, pair.vocab2.names, os.path.join(out, "plan.tsv")
        )
    print(f"best_epoch={report.best_epoch} best_val={report.best_val_metric:.6f}")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise ConfigError(f"trial budget must be >= 1, got {args.trials}")
    resolved = _resolve_config(args)
    base = _train_config(resolved)
    base.validate()
    lr_grid = [float(x) for x in str(resolved["lr_grid"]).split(",")]
    batch_grid = [int(x) for x in str(resolved["batch_grid"]).split(",")]
    alpha_lo, alpha_hi = resolved["alpha_min"], resolved["alpha_max"]
    pair = load_domain_pair(args.data)
    out = _out_dir(args.out)
    _refuse_overwrite(out, ["trials.tsv", "best_config.txt"], args.force)

    rng = np.random.default_rng(base.seed)
    best_val = -np.inf
    best_resolved = None
    with open(os.path.join(out, "trials.tsv"), "w", encoding="utf-8") as fh:
        fh.write("trial\talpha\tlr\tbatch_size\tbest_val\n")
        for trial in range(args.trials):
            alpha = 0.0 if base.regularizer == "none" else float(
                rng.uniform(alpha_lo, alpha_hi)
            )
            lr = float(lr_grid[rng.integers(len(lr_grid))])
            batch_size = int(batch_grid[rng.integers(len(batch_grid))])
            trial_config = TrainConfig(
                d=base.d,
                alpha=alpha,
                regularizer=base.regularizer,
                lam=base.lam,
                mu=base.mu,
                lr=lr,
                batch_size=batch_size,
                epochs=base.epochs,
                patience=base.patience,
                warmstart_epochs=base.warmstart_epochs,
                seed=base.seed,
                eval_metric=base.eval_metric,
            )
            _, report = fit(pair, trial_config)
            fh.write(
                f"{trial}\t{alpha:.6f}\t{lr}\t{batch_size}"
                f"\t{report.best_val_metric:.6f}\n"
            )
            if report.best_val_metric > best_val:
                best_val = report.best_val_metric
                best_resolved = dict(
                    resolved, alpha=alpha, lr=lr, batch_size=batch_size
                )

    with open(os.path.join(out, "best_config.txt"), "w", encoding="utf-8") as fh:
        for key in sorted(best_resolved):
            fh.write(f"{key}={best_resolved[key]}\n")
    print(
        f"best alpha={best_resolved['alpha']} lr={best_resolved['lr']} "
        f"batch_size={best_resolved['batch_size']} val={best_val:.6f}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if not os.path.isfile(args.checkpoint):
        raise DataError(f"checkpoint not found: {args.checkpoint}")
    model = load_checkpoint(args.checkpoint)
    pair = load_domain_pair(args.data)
    out = _out_dir(args.out)
    _refuse_overwrite(out, ["metrics.tsv"], args.force)

    intra_rank = hit_at_10(model, pair.intra_test)
    inter_rank = hit_at_10(model, pair.inter_test)
    intra_auc = roc_auc(model, pair.intra_test, seed=[args.seed, 1])
    inter_auc = roc_auc(model, pair.inter_test, seed=[args.seed, 2])

    rows = [
        ("intra", "hit@10", intra_rank.hit_at(10), intra_rank.query_count),
        ("intra", "auc", intra_auc.auc, len(pair.intra_test)),
        ("inter", "hit@10", inter_rank.hit_at(10), inter_rank.query_count),
        ("inter", "auc", inter_auc.auc, len(pair.inter_test)),
    ]
    with open(os.path.join(out, "metrics.tsv"), "w", encoding="utf-8") as fh:
        fh.write("split\tmetric\tvalue\tn\n")
        for split, metric, value, n in rows:
            fh.write(f"{split}\t{metric}\t{value:.6f}\t{n}\n")
            print(f"{split} {metric} {value:.6f} (n={n})")
    if args.ranks_out:
        with open(args.ranks_out, "w", encoding="utf-8") as fh:
            fh.write("split\trank\n")
            for split, result in (("intra", intra_rank), ("inter", inter_rank)):
                for rank in result.ranks:
                    fh.write(f"{split}\t{rank}\n")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    if not os.path.isfile(args.checkpoint):
        raise DataError(f"checkpoint not found: {args.checkpoint}")
    model = load_checkpoint(args.checkpoint)
    pair = load_domain_pair(args.data)
    out = _out_dir(args.out)
    _refuse_overwrite(out, ["embeddings.tsv", "projection.tsv"], args.force)

    common1 = {i for i, _ in pair.common}
    common2 = {j for _, j in pair.common}
    rows = []  # (domain, name, common flag, embedding)
    for domain, vocab, commons in ((1, pair.vocab1, common1), (2, pair.vocab2, common2)):
        emb = model.embeddings(domain)
        for eid, name in enumerate(vocab.names):
            rows.append((domain, name, int(eid in commons), emb[eid]))

    with open(os.path.join(out, "embeddings.tsv"), "w", encoding="utf-8") as fh:
        fh.write("domain\tentity\tcommon\t" +
                 "\t".join(f"e{i}" for i in range(model.d)) + "\n")
        for domain, name, flag, emb in rows:
            fh.write(
                f"{domain}\t{name}\t{flag}\t"
                + "\t".join(f"{x:.10e}" for x in emb) + "\n"
            )

    # Top-2 principal components of the pooled cloud.
    pooled = np.array([emb for _, _, _, emb in rows])
    centered = pooled - pooled.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    coords = centered @ vt[:2].T
    with open(os.path.join(out, "projection.tsv"), "w", encoding="utf-8") as fh:
        fh.write("domain\tentity\tcommon\tpc1\tpc2\n")
        for (domain, name, flag, _), (x, y) in zip(rows, coords):
            fh.write(f"{domain}\t{name}\t{flag}\t{x:.10e}\t{y:.10e}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interlink",
        description="Inter-domain multi-relational link prediction experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a paired sub-graph dataset")
    p.add_argument("--input", required=True, help="source triplet TSV file")
    p.add_argument("--size", type=int, required=True, help="entities per sub-graph")
    p.add_argument("--overlap", type=float, default=0.0, help="common-entity fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_sample)

    def add_train_flags(p):
        p.add_argument("--data", required=True, help="dataset directory")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--d", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--regularizer", choices=("none", "wd", "mmd"))
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--warmstart-epochs", dest="warmstart_epochs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--eval-metric", dest="eval_metric",
                       choices=("inter_auc", "inter_hit10"))
        p.add_argument("--force", action="store_true")

    p = sub.add_parser("train", help="train a model on a sampled dataset")
    add_train_flags(p)
    p.add_argument("--dump-plan", action="store_true",
                   help="write the final transport plan (wd only)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="random hyperparameter search")
    add_train_flags(p)
    p.add_argument("--trials", type=int, required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ranks-out", dest="ranks_out",
                   help="optional per-query rank dump file")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="export embeddings and a 2-D projection")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InterlinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
