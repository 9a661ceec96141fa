"""Adversarial and supervised training loops with Adam.

One call to :func:`fit` is one run: split the labelled source data 9:1
into train/validation (stratified), standardize everything with train-set
statistics, then loop epochs of minibatch steps.  In ``dann`` mode each
step takes half a batch of labelled source and half a batch of unlabelled
target, the classification loss is computed on the source half, the domain
loss on both halves through the gradient-reversal operator, and the two
losses are summed before one backward pass.  The reversal strength lambda
follows the warm-up schedule alpha(p) = 2 / (1 + exp(-gamma * p)) - 1 with
p the fraction of epochs completed.

The parameters returned are the snapshot with the best validation accuracy
(earliest epoch wins ties); the full per-epoch history is returned with
them.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from .autodiff import Parameter, Tape, Tensor, add, concat_rows, cross_entropy, slice_rows
from .data import Dataset, split, standardize_arrays
from .errors import ConfigError
from .metrics import MetricsReport
from .models import (
    FeatureExtractorConfig,
    ModelParams,
    TcnConfig,
    class_logits,
    forward_dann,
    init_params,
    predict_classes,
)
from .rng import stream

__all__ = [
    "TrainConfig",
    "GammaSchedule",
    "AdamState",
    "Batch",
    "RunHistory",
    "alpha",
    "adam_step",
    "dann_step",
    "source_only_step",
    "fit",
    "evaluate",
]

MODES = ("dann", "source_only")


def alpha(epoch: int, max_epochs: int, gamma: float = 10.0) -> float:
    """Reversal-strength warm-up at progress epoch/max_epochs.

    Exactly 0 at epoch 0, saturating towards 1; gamma sets how fast.
    """
    if max_epochs < 1:
        raise ConfigError(f"max_epochs must be >= 1, got {max_epochs}")
    if not 0 <= epoch <= max_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {max_epochs}]")
    p = epoch / max_epochs
    return 2.0 / (1.0 + math.exp(-gamma * p)) - 1.0


@dataclass
class GammaSchedule:
    gamma: float = 10.0

    def value(self, epoch: int, max_epochs: int) -> float:
        return alpha(epoch, max_epochs, self.gamma)


@dataclass
class TrainConfig:
    """Hyperparameters for one experiment; defaults are the paper setup."""

    model: str = "dann"  # dann | cnn | tcn
    mode: str = "dann"  # dann (adversarial) | source_only (plain supervised)
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 250
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    schedule: GammaSchedule = field(default_factory=GammaSchedule)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    val_ratio: tuple[int, int] = (9, 1)

    def validate(self) -> None:
        from .models import MODEL_KINDS

        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}, expected one of {MODEL_KINDS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.mode == "dann" and self.model != "dann":
            raise ConfigError(f"adversarial mode needs the dann model, got {self.model!r}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.mode == "dann" and self.batch_size % 2:
            raise ConfigError(
                f"adversarial mode splits batches in half, batch_size {self.batch_size} is odd"
            )
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0.0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.schedule.gamma <= 0.0:
            raise ConfigError(f"gamma must be positive, got {self.schedule.gamma}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if min(self.val_ratio) <= 0:
            raise ConfigError(f"val_ratio parts must be positive, got {self.val_ratio}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["val_ratio"] = list(self.val_ratio)
        return d

    _KEY_TYPES = {
        "model": str,
        "mode": str,
        "learning_rate": float,
        "batch_size": int,
        "epochs": int,
        "beta1": float,
        "beta2": float,
        "eps": float,
        "gamma": float,
        "seeds": "int_list",
    }

    @classmethod
    def from_mapping(cls, mapping: dict) -> "TrainConfig":
        """Build from string key=value pairs (the config-file format)."""
        kwargs = {}
        for key, raw in mapping.items():
            if key not in cls._KEY_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            kind = cls._KEY_TYPES[key]
            try:
                if kind == "int_list":
                    value = tuple(int(v) for v in str(raw).replace(",", " ").split())
                elif kind is int:
                    value = int(str(raw))
                elif kind is float:
                    value = float(str(raw))
                else:
                    value = str(raw).strip()
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
            if key == "gamma":
                kwargs["schedule"] = GammaSchedule(value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


class Batch(NamedTuple):
    features: np.ndarray  # [n, channels, length]
    labels: np.ndarray | None


@dataclass
class AdamState:
    """First/second moment buffers per parameter plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, Parameter]) -> "AdamState":
        return cls(
            m={n: np.zeros_like(p.value.data) for n, p in params.items()},
            v={n: np.zeros_like(p.value.data) for n, p in params.items()},
        )


def adam_step(
    params: dict[str, Parameter],
    grads: dict[str, np.ndarray | None],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place; None gradients are skipped."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        if g is None:
            continue
        p = params[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.value.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _attach(tape: Tape, mp: ModelParams) -> dict[str, Tensor]:
    return {name: tape.variable(p.value.data) for name, p in mp.params.items()}


def _collect_grads(tape: Tape, tracked: dict[str, Tensor]) -> dict[str, np.ndarray | None]:
    return {name: tape.grad(t) for name, t in tracked.items()}


def dann_step(
    mp: ModelParams,
    source_batch: Batch,
    target_batch: Batch,
    lam: float,
    state: AdamState,
    config: TrainConfig,
) -> tuple[float, float]:
    """One adversarial step; returns (label loss, domain loss).

    The domain loss sees source rows as class 0 and target rows as class 1;
    the label loss sees only the source rows.  Target batches must arrive
    unlabelled: refusing labels here keeps the adaptation honest.
    """
    if target_batch.labels is not None:
        raise ValueError("target batch carries class labels; adaptation must not see them")
    if source_batch.labels is None:
        raise ValueError("source batch is missing class labels")
    if mp.kind != "dann":
        raise ConfigError(f"dann_step needs a dann model, got {mp.kind!r}")
    n_src = source_batch.features.shape[0]
    n_tgt = target_batch.features.shape[0]
    tape = Tape()
    tracked = _attach(tape, mp)
    x = concat_rows(Tensor(source_batch.features), Tensor(target_batch.features))
    cls_logits, dom_logits = forward_dann(tracked, mp.backbone_config(), x, lam)
    label_loss = cross_entropy(slice_rows(cls_logits, 0, n_src), source_batch.labels)
    domain_labels = np.concatenate(
        [np.zeros(n_src, dtype=np.int64), np.ones(n_tgt, dtype=np.int64)]
    )
    domain_loss = cross_entropy(dom_logits, domain_labels)
    tape.backward(add(label_loss, domain_loss))
    adam_step(
        mp.params,
        _collect_grads(tape, tracked),
        state,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.eps,
    )
    return float(label_loss.data), float(domain_loss.data)


def source_only_step(
    mp: ModelParams, batch: Batch, state: AdamState, config: TrainConfig
) -> float:
    """One plain supervised step; returns the label loss."""
    if batch.labels is None:
        raise ValueError("supervised step needs labelled data")
    tape = Tape()
    tracked = _attach(tape, mp)
    logits = class_logits(mp, tracked, Tensor(batch.features))
    loss = cross_entropy(logits, batch.labels)
    tape.backward(loss)
    adam_step(
        mp.params,
        _collect_grads(tape, tracked),
        state,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.eps,
    )
    return float(loss.data)


@dataclass
class RunHistory:
    """Per-epoch trace of one fit call."""

    seed: int
    model: str
    mode: str
    label_loss: list[float] = field(default_factory=list)
    domain_loss: list[float | None] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    train_indices: np.ndarray | None = None
    val_indices: np.ndarray | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.val_accuracy)

    @property
    def best_val_accuracy(self) -> float:
        return self.val_accuracy[self.best_epoch]

    @property
    def final_val_accuracy(self) -> float:
        return self.val_accuracy[-1]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "model": self.model,
            "mode": self.mode,
            "label_loss": self.label_loss,
            "domain_loss": self.domain_loss,
            "lam": self.lam,
            "val_accuracy": self.val_accuracy,
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_accuracy,
            "final_val_accuracy": self.final_val_accuracy,
            "train_indices": None
            if self.train_indices is None
            else self.train_indices.tolist(),
            "val_indices": None if self.val_indices is None else self.val_indices.tolist(),
        }


class _TargetCycler:
    """Endless stream of target rows, reshuffled on every pass."""

    def __init__(self, n: int, seed: int):
        self._n = n
        self._seed = seed
        self._pass = 0
        self._queue: list[int] = []

    def take(self, count: int) -> np.ndarray:
        out = []
        while len(out) < count:
            if not self._queue:
                order = stream(self._seed, "shuffle", "target", self._pass).permutation(self._n)
                self._queue = list(order)
                self._pass += 1
            out.append(self._queue.pop())
        return np.array(out, dtype=np.int64)


def _default_arch(config: TrainConfig, n_channels: int):
    if config.model in ("dann", "cnn"):
        return FeatureExtractorConfig(in_channels=n_channels)
    return TcnConfig(in_channels=n_channels)


def fit(
    config: TrainConfig,
    source: Dataset,
    target: Dataset | None,
    seed: int,
    arch=None,
) -> tuple[ModelParams, RunHistory]:
    """Train one model; returns best-validation parameters and the history.

    ``target`` supplies unlabelled sequences for adversarial alignment; any
    labels it carries are discarded before the loop ever sees them.  In
    ``source_only`` mode target data is ignored entirely.
    """
    config.validate()
    if config.mode == "dann" and (target is None or len(target) == 0):
        raise ConfigError("adversarial mode needs a non-empty target dataset")

    full_x = source.feature_tensor()
    train_ds, val_ds = split(source, stream(seed, "fit", "split").integers(0, 2 ** 31))
    # Recover positions so the arrays line up with the dataset split.
    labels = source.labels()
    train_idx, val_idx = _split_positions(source, train_ds, val_ds)

    arrays = [full_x[train_idx]]
    if config.mode == "dann":
        target_x = target.feature_tensor()
        scaled, mean, std = standardize_arrays(arrays[0], full_x[val_idx], target_x)
        x_train, x_val, x_target = scaled
    else:
        scaled, mean, std = standardize_arrays(arrays[0], full_x[val_idx])
        x_train, x_val = scaled
        x_target = None
    y_train = labels[train_idx]
    y_val = labels[val_idx]

    if arch is None:
        arch = _default_arch(config, full_x.shape[1])
    mp = init_params(config.model, arch, seed)
    mp.norm_mean, mp.norm_std = mean, std
    if config.model == "tcn":
        mp.tcn_config().check_length(full_x.shape[2])
    state = AdamState.for_params(mp.params)

    history = RunHistory(seed=seed, model=config.model, mode=config.mode)
    history.train_indices = train_idx
    history.val_indices = val_idx

    half = config.batch_size // 2
    cycler = (
        _TargetCycler(x_target.shape[0], seed) if config.mode == "dann" else None
    )
    best_acc = -1.0
    best_snapshot = None

    for epoch in range(config.epochs):
        lam = config.schedule.value(epoch, config.epochs) if config.mode == "dann" else 0.0
        order = stream(seed, "shuffle", "source", epoch).permutation(x_train.shape[0])
        label_losses = []
        domain_losses = []
        step_size = half if config.mode == "dann" else config.batch_size
        n_steps = x_train.shape[0] // step_size
        for step_i in range(n_steps):
            idx = order[step_i * step_size:(step_i + 1) * step_size]
            src = Batch(x_train[idx], y_train[idx])
            if config.mode == "dann":
                tgt = Batch(x_target[cycler.take(half)], None)
                l_y, l_d = dann_step(mp, src, tgt, lam, state, config)
                domain_losses.append(l_d)
            else:
                l_y = source_only_step(mp, src, state, config)
            label_losses.append(l_y)

        val_pred = predict_classes(mp, x_val)
        val_acc = float((val_pred == y_val).mean())
        history.label_loss.append(float(np.mean(label_losses)))
        history.domain_loss.append(
            float(np.mean(domain_losses)) if domain_losses else None
        )
        history.lam.append(lam)
        history.val_accuracy.append(val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            history.best_epoch = epoch
            best_snapshot = {n: p.value.data.copy() for n, p in mp.params.items()}

    result = ModelParams(
        kind=mp.kind,
        arch=dict(mp.arch),
        seed=seed,
        params={n: Parameter(n, arr) for n, arr in best_snapshot.items()},
        norm_mean=mean.copy(),
        norm_std=std.copy(),
        extras={
            "mode": config.mode,
            "best_epoch": history.best_epoch,
            "best_val_accuracy": history.best_val_accuracy,
            "final_val_accuracy": history.final_val_accuracy,
            "half_batch": [half, half] if config.mode == "dann" else None,
            "train_size": int(train_idx.size),
            "val_size": int(val_idx.size),
            "target_size": int(x_target.shape[0]) if x_target is not None else 0,
        },
    )
    return result, history


def _split_positions(source, train_ds, val_ds):
    """Positions of the split datasets' samples within the source dataset."""
    by_id = {id(s): i for i, s in enumerate(source.samples)}
    train_idx = np.array([by_id[id(s)] for s in train_ds.samples], dtype=np.int64)
    val_idx = np.array([by_id[id(s)] for s in val_ds.samples], dtype=np.int64)
    return train_idx, val_idx


def evaluate(mp: ModelParams, dataset: Dataset) -> MetricsReport:
    """Standardize with the checkpoint's statistics, predict, and score."""
    from .data import N_CLASSES

    x = dataset.feature_tensor()
    y = dataset.labels()
    if mp.norm_mean is not None:
        x = (x - mp.norm_mean[None, :, None]) / mp.norm_std[None, :, None]
    pred = predict_classes(mp, x)
    return MetricsReport.from_predictions(y, pred, N_CLASSES)
