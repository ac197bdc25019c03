"""Command-line entry point: convert / train / profile / report.

Every command is deterministic given its flags; all randomness is keyed
off --seed.  Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
abort.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_cifar_subset, load_dataset, load_mnist_subset, \
    load_silhouettes, save_dataset
from .errors import NumericAbortError, RbmGradLabError
from .estimators import Strategy
from .training import Checkpoint, LrMode, TrainConfig, load_checkpoint, \
    save_checkpoint, train
from .variance import ProtocolConfig, VarianceRow, aggregate, profile_cd, \
    profile_icd, profile_pcd_mean, _baseline_example_variances

CSV_HEADER = "dataset,init_seed,epoch,strategy,k,mean_variance,baseline_mean_variance,ratio"

_STRATEGY_ORDER = (Strategy.CD.value, Strategy.ICD.value, Strategy.PCD.value)


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _write_manifest(path, config: dict, dataset_id: str, seeds,
                    outputs, started: str) -> None:
    manifest = {
        "config_hash": _config_hash(config),
        "config": config,
        "dataset_id": dataset_id,
        "seeds": sorted(int(s) for s in seeds),
        "versions": {
            "rbmgradlab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "timestamps": {"started": started, "finished": _utcnow()},
        "outputs": sorted(str(o) for o in outputs),
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _int_list(text: str) -> tuple:
    """Comma-separated integers; ``A..B`` expands to the inclusive range."""
    values = []
    try:
        for part in text.split(","):
            if part == "":
                continue
            if ".." in part:
                lo, hi = part.split("..")
                values.extend(range(int(lo), int(hi) + 1))
            else:
                values.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected integers like 1,2,5 or 1..10, got {text!r}")
    return tuple(values)


def _load_config_file(path):
    if path is None:
        return {}
    with open(path) as f:
        config = json.load(f)
    if not isinstance(config, dict):
        raise ValueError(f"{path}: config file must hold a JSON object")
    return config


def _resolve(args, file_config: dict, key: str, default, convert=None):
    """CLI flag > config file entry > built-in default."""
    value = getattr(args, key)
    if value is None:
        value = file_config.get(key, default)
        if convert is not None and isinstance(value, str):
            value = convert(value)
    return value


def _format_float(x: float) -> str:
    return repr(float(x))


def write_report_csv(rows, path) -> None:
    rows = sorted(rows, key=lambda r: (r.dataset_id, r.init_seed, r.epoch,
                                       _STRATEGY_ORDER.index(r.strategy), r.k))
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for r in rows:
            f.write(",".join([
                r.dataset_id, str(r.init_seed), str(r.epoch), r.strategy,
                str(r.k), _format_float(r.mean_variance),
                _format_float(r.baseline_mean_variance), _format_float(r.ratio),
            ]) + "\n")


def read_report_csv(path) -> list:
    with open(path, newline="") as f:
        header = f.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise RbmGradLabError(
                f"{path}: bad report header\n  expected: {CSV_HEADER}\n"
                f"  found:    {header}"
            )
        rows = []
        for lineno, line in enumerate(f, start=2):
            fields = line.rstrip("\n").split(",")
            if len(fields) != 8:
                raise RbmGradLabError(
                    f"{path}:{lineno}: expected 8 fields, got {len(fields)}"
                )
            try:
                rows.append(VarianceRow(
                    dataset_id=fields[0], init_seed=int(fields[1]),
                    epoch=int(fields[2]), strategy=fields[3], k=int(fields[4]),
                    mean_variance=float(fields[5]),
                    baseline_mean_variance=float(fields[6]),
                    ratio=float(fields[7]),
                ))
            except ValueError as exc:
                raise RbmGradLabError(f"{path}:{lineno}: {exc}") from None
    return rows


def _aggregate_json(cells) -> dict:
    return {
        "cells": [
            {
                "dataset": c.dataset_id, "strategy": c.strategy, "k": c.k,
                "epoch": c.epoch, "mean_ratio": c.mean_ratio,
                "std_ratio": c.std_ratio, "n_inits": c.n_inits,
                "single_init": c.single_init,
            }
            for c in cells
        ],
    }


def _write_aggregate(rows, n_inits: int, path) -> list:
    cells = aggregate(rows, n_inits)
    with open(path, "w") as f:
        json.dump(_aggregate_json(cells), f, indent=2, sort_keys=True)
        f.write("\n")
    if any(c.single_init for c in cells):
        print("warning: single init seed, spread reported as 0", file=sys.stderr)
    return cells


# ---------------------------------------------------------------------------
# subcommands

def _cmd_convert(args) -> int:
    loaders = {
        "mnist": lambda paths: load_mnist_subset(paths[0], paths[1]),
        "cifar": lambda paths: load_cifar_subset(paths),
        "silhouettes": lambda paths: load_silhouettes(paths[0]),
    }
    expected = {"mnist": 2, "silhouettes": 1}
    if args.format in expected and len(args.inputs) != expected[args.format]:
        print(f"error: format {args.format} takes exactly "
              f"{expected[args.format]} input path(s)", file=sys.stderr)
        return 2
    dataset = loaders[args.format](args.inputs)
    save_dataset(dataset, args.out)
    print(f"wrote {dataset.n_examples} x {dataset.dim} intensities to {args.out}")
    return 0


def _cmd_train(args) -> int:
    started = _utcnow()
    file_config = _load_config_file(args.config)
    epochs = _resolve(args, file_config, "epochs", None)
    if epochs is None:
        print("error: --epochs is required (flag or config file)", file=sys.stderr)
        return 2
    cfg = TrainConfig(
        epochs=int(epochs),
        minibatch_size=int(_resolve(args, file_config, "minibatch", 100)),
        learning_rate=float(_resolve(args, file_config, "lr", 0.01)),
        lr_mode=LrMode(_resolve(args, file_config, "lr_mode", "fixed")),
        seed=int(_resolve(args, file_config, "seed", 0)),
        checkpoint_epochs=tuple(_resolve(args, file_config, "checkpoints", (),
                                         _int_list)),
        n_hidden=_resolve(args, file_config, "hidden", None),
    )
    data = load_dataset(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []

    def _emit(ckpt: Checkpoint) -> None:
        path = out_dir / f"checkpoint_seed{ckpt.train_seed}_epoch{ckpt.epoch}.rbmckpt"
        save_checkpoint(ckpt, path)
        written.append(path)
        print(f"checkpoint epoch {ckpt.epoch} -> {path}")

    config = {
        "command": "train", "data": str(args.data), "epochs": cfg.epochs,
        "minibatch": cfg.minibatch_size, "lr": cfg.learning_rate,
        "lr_mode": cfg.lr_mode.value, "seed": cfg.seed,
        "checkpoints": list(cfg.checkpoint_epochs), "hidden": cfg.n_hidden,
    }
    try:
        train(data, cfg, on_checkpoint=_emit)
    except NumericAbortError:
        _write_manifest(out_dir / "manifest.json", config, data.id,
                        [cfg.seed], written, started)
        print(f"checkpoints written before abort retained: "
              f"{[str(p) for p in written]}", file=sys.stderr)
        raise
    _write_manifest(out_dir / "manifest.json", config, data.id,
                    [cfg.seed], written, started)
    return 0


def _cmd_profile(args) -> int:
    started = _utcnow()
    file_config = _load_config_file(args.config)
    strategies = _resolve(args, file_config, "strategies", "cd,icd,pcd")
    strategies = tuple(s for s in strategies.split(",") if s)
    unknown = [s for s in strategies if s not in _STRATEGY_ORDER]
    if unknown:
        print(f"error: unknown strategies {unknown}", file=sys.stderr)
        return 2
    jobs = _resolve(args, file_config, "jobs", None)
    if jobs is None:
        jobs = int(os.environ.get("RBMGRADLAB_JOBS", "1"))
    cfg = ProtocolConfig(
        seed=int(_resolve(args, file_config, "seed", 0)),
        n_inits=1,  # replaced below once checkpoints are known
        repeats_per_example=int(_resolve(args, file_config, "repeats", 10)),
        k_values=tuple(_resolve(args, file_config, "k", tuple(range(1, 11)),
                                _int_list)),
        k_baseline=int(_resolve(args, file_config, "k_baseline", 1000)),
        pcd_burn_in=int(_resolve(args, file_config, "burn_in", 1000)),
        pcd_mean_lengths=tuple(_resolve(args, file_config, "pcd_lengths",
                                        tuple(range(1, 11)), _int_list)),
        example_subset_size=_resolve(args, file_config, "subset", None),
        rebinarize=not bool(_resolve(args, file_config, "fixed_binarization",
                                     False)),
    )
    data = load_dataset(args.data)
    checkpoints = sorted((load_checkpoint(p) for p in args.checkpoint),
                         key=lambda c: (c.train_seed, c.epoch))
    seeds = sorted({c.train_seed for c in checkpoints})
    n_inits = int(_resolve(args, file_config, "inits", len(seeds)))
    if n_inits != len(seeds):
        print(f"error: --inits {n_inits} but checkpoints carry "
              f"{len(seeds)} distinct init seeds {seeds}", file=sys.stderr)
        return 2
    cfg = dataclasses.replace(cfg, n_inits=n_inits)

    rows = []
    for ckpt in checkpoints:
        baseline_vars = None
        if Strategy.CD.value in strategies or Strategy.ICD.value in strategies:
            baseline_vars = _baseline_example_variances(ckpt, data, cfg, jobs)
        if Strategy.CD.value in strategies:
            rows.extend(profile_cd(ckpt, data, cfg, jobs,
                                   _baseline_vars=baseline_vars))
        if Strategy.ICD.value in strategies:
            rows.extend(profile_icd(ckpt, data, cfg, jobs,
                                    _baseline_vars=baseline_vars))
        if Strategy.PCD.value in strategies:
            rows.extend(profile_pcd_mean(ckpt, data, cfg, jobs))

    out = Path(args.out)
    write_report_csv(rows, out)
    summary_path = out.with_suffix(".summary.json")
    _write_aggregate(rows, n_inits, summary_path)

    config = {
        "command": "profile", "data": str(args.data),
        "checkpoints": sorted(str(p) for p in args.checkpoint),
        "strategies": list(strategies), "seed": cfg.seed,
        "repeats": cfg.repeats_per_example, "k": list(cfg.k_values),
        "k_baseline": cfg.k_baseline, "burn_in": cfg.pcd_burn_in,
        "pcd_lengths": list(cfg.pcd_mean_lengths),
        "subset": cfg.example_subset_size, "inits": n_inits,
        "rebinarize": cfg.rebinarize,
    }
    _write_manifest(out.with_suffix(".manifest.json"), config, data.id,
                    seeds, [out, summary_path], started)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _cmd_report(args) -> int:
    rows = read_report_csv(args.input)
    if args.strategies:
        wanted = tuple(s for s in args.strategies.split(",") if s)
        unknown = [s for s in wanted if s not in _STRATEGY_ORDER]
        if unknown:
            print(f"error: unknown strategies {unknown}", file=sys.stderr)
            return 2
        if wanted:
            rows = [r for r in rows if r.strategy in wanted]
    if not rows:
        raise RbmGradLabError("no rows to aggregate after filtering")
    n_inits = args.inits if args.inits is not None else len({r.init_seed
                                                             for r in rows})
    cells = _write_aggregate(rows, n_inits, args.out)
    print(f"wrote {len(cells)} aggregate cells to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbmgradlab",
        description="RBM gradient-estimator variance laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="ingest a corpus into an RBMDS1 file")
    p.add_argument("--format", required=True,
                   choices=["mnist", "cifar", "silhouettes"])
    p.add_argument("--out", required=True)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("train", help="train with minibatch CD-1 and checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--minibatch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-mode", dest="lr_mode", choices=["fixed", "adaptive"])
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoints", type=_int_list,
                   help="comma-separated epochs to checkpoint (0 = init)")
    p.add_argument("--hidden", type=int, help="hidden units (default: data dim)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--config", help="JSON config file, overridden by flags")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("profile", help="measure estimator variance on checkpoints")
    p.add_argument("--checkpoint", action="append", required=True,
                   help="checkpoint file; repeat for several")
    p.add_argument("--data", required=True)
    p.add_argument("--strategies", help="subset of cd,icd,pcd (default all)")
    p.add_argument("--k", type=_int_list, help="CD/I-CD chain lengths")
    p.add_argument("--k-baseline", dest="k_baseline", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--inits", type=int,
                   help="expected number of init seeds (default: found)")
    p.add_argument("--subset", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--pcd-lengths", dest="pcd_lengths", type=_int_list)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--fixed-binarization", dest="fixed_binarization",
                   action="store_const", const=True,
                   help="binarize each positive example once instead of per draw")
    p.add_argument("--jobs", type=int,
                   help="worker processes (default: $RBMGRADLAB_JOBS or 1)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file, overridden by flags")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("report", help="aggregate a report CSV into summary JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategies", help="filter to these strategies (default all)")
    p.add_argument("--inits", type=int)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericAbortError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 4
    except (RbmGradLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
