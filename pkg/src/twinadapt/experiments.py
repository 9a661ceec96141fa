"""Experiment orchestration: multi-seed benchmark and ablation studies.

A benchmark trains every requested model across the configured seeds on
the source corpus (the adversarial model also sees the unlabelled target)
and scores train / validation / target-test accuracy plus per-class F1.
The ablation contrasts training on a 70% slice of the small labelled
target set alone against the twin-supported pipeline, both scored on the
held-out 30%.

Runs are independent, so ``jobs > 1`` fans them out over processes; the
report is assembled in a fixed order either way and is byte-deterministic.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .data import CLASS_NAMES, Dataset, split
from .errors import DataError
from .metrics import aggregate, MetricsReport
from .training import RunHistory, TrainConfig, evaluate, fit
from .models import ModelParams

__all__ = ["run_benchmark", "run_ablation", "run_single"]

DEFAULT_MODELS = ("cnn", "tcn", "dann")


def _mode_for(model: str) -> str:
    return "dann" if model == "dann" else "source_only"


def run_single(
    config: TrainConfig, source: Dataset, target: Dataset | None, seed: int
) -> tuple[ModelParams, RunHistory]:
    """One fit with the target stripped of labels before training sees it."""
    unlabelled = target.without_labels() if target is not None else None
    return fit(config, source, unlabelled, seed)


def _fit_task(args):
    key, config, source, target, seed = args
    mp, history = run_single(config, source, target, seed)
    return key, mp, history


def _run_all(tasks: list, jobs: int) -> dict:
    """Execute fit tasks, optionally across processes; keyed results."""
    results = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            for key, mp, history in pool.map(_fit_task, tasks):
                results[key] = (mp, history)
    else:
        for task in tasks:
            key, mp, history = _fit_task(task)
            results[key] = (mp, history)
    return results


def _mean_curves(histories: list[RunHistory]) -> dict:
    label = np.mean([h.label_loss for h in histories], axis=0).tolist()
    has_domain = all(
        h.domain_loss and all(v is not None for v in h.domain_loss) for h in histories
    )
    domain = (
        np.mean([h.domain_loss for h in histories], axis=0).tolist() if has_domain else None
    )
    acc = np.mean([h.val_accuracy for h in histories], axis=0).tolist()
    lam = np.mean([h.lam for h in histories], axis=0).tolist()
    return {"label_loss": label, "domain_loss": domain, "val_accuracy": acc, "lam": lam}


def _mean_std_dict(values: list[float]) -> dict:
    from .metrics import _mean_std

    return _mean_std(values).to_dict()


def _aggregate_runs(runs: list[dict], test_reports: list[MetricsReport]) -> dict:
    agg = aggregate(test_reports)
    return {
        "train_accuracy": _mean_std_dict([r["train_accuracy"] for r in runs]),
        "val_accuracy": _mean_std_dict([r["val_accuracy"] for r in runs]),
        "final_val_accuracy": _mean_std_dict([r["final_val_accuracy"] for r in runs]),
        "test_accuracy": agg.accuracy.to_dict(),
        "test_macro_f1": agg.macro_f1.to_dict(),
        "test_per_class": [
            {k: v.to_dict() for k, v in row.items()} for row in agg.per_class
        ],
    }


def run_benchmark(
    config: TrainConfig,
    source: Dataset,
    target: Dataset,
    models: tuple[str, ...] = DEFAULT_MODELS,
    jobs: int = 1,
) -> dict:
    """Train models x seeds on the twin corpus and score on the target."""
    if not target.has_labels():
        raise DataError("benchmark needs a fully labelled target corpus for scoring")
    tasks = []
    for model in models:
        cfg = replace(config, model=model, mode=_mode_for(model))
        cfg.validate()
        for seed in config.seeds:
            tasks.append(((model, seed), cfg, source, target, seed))
    results = _run_all(tasks, jobs)

    body: dict = {"model_order": list(models), "class_names": list(CLASS_NAMES), "models": {}}
    for model in models:
        runs = []
        histories = []
        test_reports = []
        for seed in config.seeds:
            mp, history = results[(model, seed)]
            train_acc = evaluate(mp, source.subset(history.train_indices)).accuracy
            test_report = evaluate(mp, target)
            runs.append(
                {
                    "seed": seed,
                    "best_epoch": history.best_epoch,
                    "train_accuracy": train_acc,
                    "val_accuracy": history.best_val_accuracy,
                    "final_val_accuracy": history.final_val_accuracy,
                    "test": test_report.to_dict(),
                }
            )
            histories.append(history)
            test_reports.append(test_report)
        body["models"][model] = {
            "mode": _mode_for(model),
            "runs": runs,
            "aggregate": _aggregate_runs(runs, test_reports),
            "mean_curves": _mean_curves(histories),
        }
    return body


def run_ablation(
    config: TrainConfig,
    source: Dataset,
    target: Dataset,
    models: tuple[str, ...] = DEFAULT_MODELS,
    jobs: int = 1,
    test_ratio: tuple[int, int] = (7, 3),
) -> dict:
    """Contrast real-data-only training with the twin-supported pipeline.

    The labelled target is split once (stratified, by the first seed) into
    a small training part and a test part shared by every run.  Real-only
    runs are plain supervised fits on the training part.  Twin-supported
    runs train on the source corpus; the adversarial model additionally
    adapts on the full unlabelled target, so its rows are transductive with
    respect to the test part and are flagged as such.
    """
    if not target.has_labels():
        raise DataError("ablation needs a fully labelled target corpus")
    split_seed = config.seeds[0]
    target_train, target_test = split(target, split_seed, ratio=test_ratio)

    tasks = []
    for model in models:
        real_cfg = replace(config, model=model, mode="source_only")
        real_cfg.validate()
        twin_cfg = replace(config, model=model, mode=_mode_for(model))
        twin_cfg.validate()
        for seed in config.seeds:
            tasks.append(((model, "real", seed), real_cfg, target_train, None, seed))
            tasks.append(((model, "twin", seed), twin_cfg, source, target, seed))
    results = _run_all(tasks, jobs)

    body: dict = {
        "model_order": list(models),
        "class_names": list(CLASS_NAMES),
        "split": {
            "seed": split_seed,
            "ratio": list(test_ratio),
            "n_train": len(target_train),
            "n_test": len(target_test),
        },
        "models": {},
    }
    for model in models:
        entry = {}
        for arm in ("real", "twin"):
            runs = []
            test_reports = []
            for seed in config.seeds:
                mp, history = results[(model, arm, seed)]
                test_report = evaluate(mp, target_test)
                runs.append(
                    {
                        "seed": seed,
                        "best_epoch": history.best_epoch,
                        "train_accuracy": evaluate(
                            mp,
                            (target_train if arm == "real" else source).subset(
                                history.train_indices
                            ),
                        ).accuracy,
                        "val_accuracy": history.best_val_accuracy,
                        "final_val_accuracy": history.final_val_accuracy,
                        "test": test_report.to_dict(),
                    }
                )
                test_reports.append(test_report)
            entry[arm] = {
                "runs": runs,
                "aggregate": _aggregate_runs(runs, test_reports),
                "transductive": arm == "twin" and model == "dann",
            }
        body["models"][model] = entry
    return body
