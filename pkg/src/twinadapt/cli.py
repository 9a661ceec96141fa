"""Command-line interface.

Subcommands::

    twinadapt generate   simulate a twin corpus (source + target) to disk
    twinadapt train      train one model on a corpus, save a checkpoint
    twinadapt eval       score a checkpoint against a corpus domain
    twinadapt benchmark  train all models across seeds, emit full reports
    twinadapt ablate     real-data-only vs twin-supported comparison

Exit codes: 0 success, 2 configuration problem, 3 data problem, 4 other
runtime failure.  When ``--out`` is omitted, artifacts land under the
directory named by the TWINADAPT_OUT environment variable (default the
working directory) in a per-command subdirectory.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .data import generate_corpus, load_dataset, save_dataset, import_csv_dataset
from .errors import ConfigError, DataError, TwinAdaptError
from .experiments import DEFAULT_MODELS, run_ablation, run_benchmark, run_single
from .models import MODEL_KINDS, load_checkpoint, save_checkpoint
from .reports import build_meta, render_ablation, render_benchmark, write_json
from .training import TrainConfig, evaluate
from .twin import GapConfig, TwinConfig

__all__ = [
    "main",
    "parse_config_file",
    "cmd_generate",
    "cmd_train",
    "cmd_eval",
    "cmd_benchmark",
    "cmd_ablate",
]


def parse_config_file(path) -> dict[str, str]:
    """Read a key = value config file; '#' starts a comment."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _resolve_out(args, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get("TWINADAPT_OUT", ".")) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_config(args) -> TrainConfig:
    mapping = parse_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = TrainConfig.from_mapping(mapping) if mapping else TrainConfig()
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, epochs=args.epochs)
    if getattr(args, "seeds", None) is not None:
        cfg = replace(cfg, seeds=args.seeds)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if getattr(args, "model", None) is not None:
        mode = "dann" if args.model == "dann" else "source_only"
        cfg = replace(cfg, model=args.model, mode=mode)
    cfg.validate()
    return cfg


def _load_corpus(corpus: str):
    """Load (source, target) from a corpus directory.

    A directory holding ``source.json``/``target.json`` is a native corpus;
    a directory holding ``manifest.csv`` is a CSV import and supplies the
    target side only (the source must then come from generation).
    """
    root = Path(corpus)
    if not root.exists():
        raise DataError(f"corpus path does not exist: {root}")
    if (root / "manifest.csv").exists():
        return None, import_csv_dataset(root)
    source_manifest = root / "source.json"
    target_manifest = root / "target.json"
    if not source_manifest.exists() or not target_manifest.exists():
        raise DataError(
            f"{root} is not a corpus directory: expected source.json and "
            "target.json (or manifest.csv for a CSV import)"
        )
    return load_dataset(root / "source"), load_dataset(root / "target")


def _twin_config(args) -> TwinConfig:
    return TwinConfig(
        sequence_length=args.seq_len,
        gap=GapConfig(
            gain_offset=args.gap_gain,
            lag_tau=args.gap_lag,
            noise_std=args.gap_noise,
        ),
    )


def cmd_generate(args) -> int:
    out = _resolve_out(args, "corpus")
    cfg = _twin_config(args)
    source, target = generate_corpus(cfg, args.source_traj, args.target_traj, args.seed)
    save_dataset(source, out / "source")
    save_dataset(target, out / "target")
    print(f"wrote {len(source)} source samples to {out / 'source'}.bin/.json")
    print(f"wrote {len(target)} target samples to {out / 'target'}.bin/.json")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    source, target = _load_corpus(args.corpus)
    if source is None:
        raise DataError("training needs a native corpus with a source side")
    out = _resolve_out(args, "train")
    seed = config.seeds[0]
    mp, history = run_single(config, source, target, seed)
    base = out / f"{config.model}_seed{seed}"
    save_checkpoint(mp, base)
    meta = build_meta("train", config.to_dict(), _provenance(source, target), [seed])
    write_json(
        out / f"{config.model}_seed{seed}_history.json",
        {"meta": meta, "history": history.to_dict()},
    )
    print(
        f"trained {config.model} (seed {seed}, {config.epochs} epochs): "
        f"best val accuracy {history.best_val_accuracy:.4f} "
        f"at epoch {history.best_epoch}"
    )
    print(f"checkpoint: {base}.bin/.json")
    return 0


def cmd_eval(args) -> int:
    mp = load_checkpoint(args.checkpoint)
    source, target = _load_corpus(args.corpus)
    dataset = target if args.domain == "target" else source
    if dataset is None:
        raise DataError(f"corpus has no {args.domain} side")
    report = evaluate(mp, dataset)
    out = _resolve_out(args, "eval")
    meta = build_meta(
        "eval",
        {"checkpoint": str(args.checkpoint), "domain": args.domain},
        _provenance(source, target),
        [mp.seed],
    )
    path = out / "eval.json"
    write_json(path, {"meta": meta, "metrics": report.to_dict()})
    print(f"{args.domain} accuracy {report.accuracy:.4f} over {report.n_samples} samples")
    print(f"report: {path}")
    return 0


def _provenance(source, target) -> dict:
    return {
        "source": None if source is None else source.provenance,
        "target": None if target is None else target.provenance,
        "n_source": None if source is None else len(source),
        "n_target": None if target is None else len(target),
    }


def cmd_benchmark(args) -> int:
    config = _resolve_config(args)
    source, target = _load_corpus(args.corpus)
    if source is None:
        raise DataError("benchmark needs a native corpus with a source side")
    models = tuple(args.models)
    body = run_benchmark(config, source, target, models=models, jobs=args.jobs)
    meta = build_meta("benchmark", config.to_dict(), _provenance(source, target), config.seeds)
    report = {"meta": meta, **body}
    out = _resolve_out(args, "benchmark")
    written = render_benchmark(report, out)
    print((out / "benchmark_accuracy.txt").read_text(), end="")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_ablate(args) -> int:
    config = _resolve_config(args)
    source, target = _load_corpus(args.corpus)
    if source is None:
        raise DataError("ablation needs a native corpus with a source side")
    models = tuple(args.models)
    body = run_ablation(config, source, target, models=models, jobs=args.jobs)
    meta = build_meta("ablate", config.to_dict(), _provenance(source, target), config.seeds)
    report = {"meta": meta, **body}
    out = _resolve_out(args, "ablation")
    written = render_ablation(report, out)
    print((out / "ablation.txt").read_text(), end="")
    for path in written:
        print(f"wrote {path}")
    return 0


def _seeds_arg(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc


def _models_arg(text: str) -> tuple[str, ...]:
    models = tuple(v for v in text.replace(",", " ").split())
    for m in models:
        if m not in MODEL_KINDS:
            raise argparse.ArgumentTypeError(f"unknown model {m!r}")
    return models


def _add_common_training_flags(sub, multi_seed: bool):
    sub.add_argument("--corpus", required=True, help="corpus directory")
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--epochs", type=int, help="override training epochs")
    if multi_seed:
        sub.add_argument(
            "--seeds", type=_seeds_arg, help="comma-separated run seeds (default 0,1,2,3,4)"
        )
        sub.add_argument(
            "--models",
            type=_models_arg,
            default=DEFAULT_MODELS,
            help="comma-separated models (default cnn,tcn,dann)",
        )
        sub.add_argument("--jobs", type=int, default=1, help="parallel fit processes")
    else:
        sub.add_argument("--seed", type=int, help="run seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinadapt",
        description="Domain-adversarial fault diagnosis on digital-twin sequence data",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="simulate a twin corpus")
    gen.add_argument("--out", help="output directory")
    gen.add_argument("--source-traj", type=int, default=400, help="source trajectories (x9 classes)")
    gen.add_argument("--target-traj", type=int, default=90, help="target samples")
    gen.add_argument("--seq-len", type=int, default=1000, help="sequence length")
    gen.add_argument("--seed", type=int, default=0, help="corpus seed")
    gen.add_argument("--gap-gain", type=float, default=GapConfig.gain_offset, help="reality-gap gain offset")
    gen.add_argument("--gap-lag", type=float, default=GapConfig.lag_tau, help="reality-gap lag time constant (s)")
    gen.add_argument("--gap-noise", type=float, default=GapConfig.noise_std, help="observation noise std (m)")
    gen.set_defaults(func=cmd_generate)

    train = subs.add_parser("train", help="train one model")
    _add_common_training_flags(train, multi_seed=False)
    train.add_argument("--model", choices=MODEL_KINDS, default="dann")
    train.set_defaults(func=cmd_train)

    ev = subs.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True, help="checkpoint base path (no suffix)")
    ev.add_argument("--corpus", required=True, help="corpus directory")
    ev.add_argument("--domain", choices=["source", "target"], default="target")
    ev.add_argument("--out", help="output directory")
    ev.set_defaults(func=cmd_eval)

    bench = subs.add_parser("benchmark", help="multi-seed model comparison")
    _add_common_training_flags(bench, multi_seed=True)
    bench.set_defaults(func=cmd_benchmark)

    abl = subs.add_parser("ablate", help="real-only vs twin-supported study")
    _add_common_training_flags(abl, multi_seed=True)
    abl.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TwinAdaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
