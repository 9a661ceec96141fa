"""Datasets of fixed-length sequence samples plus corpus IO.

A sample is a [length, 6] float64 feature matrix (desired end-effector
xyz, then tracking residual xyz, time down the rows), an optional class
label (0 = healthy, 1-8 = the four fault motors times two fault modes, in
the order listed in ``CLASS_NAMES``), and a domain tag: ``source`` for
digital-twin data, ``target`` for data from the (simulated or actual)
real robot.

Native storage is a raw little-endian float64 block plus a JSON manifest;
round-trips are bit-exact.  A directory of per-sample CSV files with a
``manifest.csv`` index can be imported for corpora published elsewhere.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .rng import stream
from .twin import TwinConfig, simulate_sample

__all__ = [
    "CLASS_NAMES",
    "N_CLASSES",
    "N_FEATURES",
    "SOURCE",
    "TARGET",
    "SequenceSample",
    "Dataset",
    "generate_corpus",
    "split",
    "standardize",
    "standardize_arrays",
    "make_batches",
    "save_dataset",
    "load_dataset",
    "import_csv_dataset",
]

CLASS_NAMES = (
    "Healthy",
    "Motor 1 Stuck",
    "Motor 1 Steady state error",
    "Motor 2 Stuck",
    "Motor 2 Steady state error",
    "Motor 3 Stuck",
    "Motor 3 Steady state error",
    "Motor 4 Stuck",
    "Motor 4 Steady state error",
)
N_CLASSES = len(CLASS_NAMES)
N_FEATURES = 6
SOURCE = "source"
TARGET = "target"

_FORMAT_VERSION = 1


@dataclass
class SequenceSample:
    """One fixed-length multichannel sequence with labels."""

    features: np.ndarray  # [length, 6] float64
    class_label: int | None
    domain_label: str

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != N_FEATURES:
            raise DataError(f"sample features must be [length, {N_FEATURES}], got {feats.shape}")
        self.features = feats
        if self.class_label is not None:
            label = int(self.class_label)
            if not 0 <= label < N_CLASSES:
                raise DataError(f"class label {label} out of range [0, {N_CLASSES})")
            self.class_label = label
        if self.domain_label not in (SOURCE, TARGET):
            raise DataError(f"domain label must be source or target, got {self.domain_label!r}")

    @property
    def length(self) -> int:
        return self.features.shape[0]


@dataclass
class Dataset:
    """An ordered collection of same-length samples plus provenance."""

    samples: list[SequenceSample]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {s.length for s in self.samples}
        if len(lengths) > 1:
            raise DataError(f"samples have mixed lengths: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def length(self) -> int:
        if not self.samples:
            raise DataError("empty dataset has no sequence length")
        return self.samples[0].length

    def labels(self) -> np.ndarray:
        """Integer class labels; raises if any sample is unlabelled."""
        if any(s.class_label is None for s in self.samples):
            raise DataError("dataset contains unlabelled samples")
        return np.array([s.class_label for s in self.samples], dtype=np.int64)

    def has_labels(self) -> bool:
        return bool(self.samples) and all(s.class_label is not None for s in self.samples)

    def feature_tensor(self) -> np.ndarray:
        """Stacked features shaped [n, channels, length] for the models."""
        if not self.samples:
            raise DataError("empty dataset has no features")
        stack = np.stack([s.features for s in self.samples])
        return np.ascontiguousarray(stack.transpose(0, 2, 1))

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        picked = [self.samples[int(i)] for i in indices]
        return Dataset(picked, dict(self.provenance))

    def without_labels(self) -> "Dataset":
        stripped = [
            SequenceSample(s.features, None, s.domain_label) for s in self.samples
        ]
        return Dataset(stripped, dict(self.provenance))


def generate_corpus(
    cfg: TwinConfig,
    n_source_traj: int,
    n_target_traj: int,
    seed: int,
) -> tuple[Dataset, Dataset]:
    """Simulate a source corpus and a target corpus.

    Source: every class is simulated under each of ``n_source_traj``
    trajectories (balanced, 9 per trajectory).  Target: one sample per
    trajectory with classes assigned round-robin, reality gap applied.
    """
    cfg.validate()
    if n_source_traj < 1 or n_target_traj < 0:
        raise ConfigError("corpus needs n_source_traj >= 1 and n_target_traj >= 0")
    source_samples = []
    for traj in range(n_source_traj):
        traj_seed = int(stream(seed, "corpus", SOURCE, traj).integers(0, 2 ** 63))
        for class_id in range(N_CLASSES):
            source_samples.append(simulate_sample(cfg, class_id, SOURCE, traj_seed))
    target_samples = []
    for traj in range(n_target_traj):
        traj_seed = int(stream(seed, "corpus", TARGET, traj).integers(0, 2 ** 63))
        target_samples.append(
            simulate_sample(cfg, traj % N_CLASSES, TARGET, traj_seed)
        )
    provenance = {
        "generated": {
            "seed": int(seed),
            "n_source_traj": int(n_source_traj),
            "n_target_traj": int(n_target_traj),
            "twin_config": cfg.to_dict(),
        }
    }
    return (
        Dataset(source_samples, dict(provenance)),
        Dataset(target_samples, dict(provenance)),
    )


def split(
    dataset: Dataset, seed: int, ratio: tuple[int, int] = (9, 1)
) -> tuple[Dataset, Dataset]:
    """Stratified split into (first, second) parts at the given ratio.

    Each class is shuffled and divided so the second part gets the
    round-to-nearest share, at least 1 and at most all-but-1 per class.
    """
    if min(ratio) <= 0:
        raise ConfigError(f"split ratio parts must be positive, got {ratio}")
    labels = dataset.labels()
    second_frac = ratio[1] / (ratio[0] + ratio[1])
    rng = stream(seed, "split", ratio)
    first_idx, second_idx = [], []
    for class_id in np.unique(labels):
        members = np.flatnonzero(labels == class_id)
        if members.size < 2:
            raise DataError(
                f"cannot stratify: class {int(class_id)} has {members.size} sample(s)"
            )
        members = rng.permutation(members)
        n_second = int(round(members.size * second_frac))
        n_second = min(max(n_second, 1), members.size - 1)
        second_idx.extend(members[:n_second])
        first_idx.extend(members[n_second:])
    first_idx = np.sort(np.array(first_idx, dtype=np.int64))
    second_idx = np.sort(np.array(second_idx, dtype=np.int64))
    return dataset.subset(first_idx), dataset.subset(second_idx)


def standardize_arrays(
    train: np.ndarray, *others: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Per-channel z-score of [n, channels, length] arrays.

    Statistics come from ``train`` only; a standard-deviation floor of
    1e-8 keeps constant channels finite (they standardize to zero).
    """
    mean = train.mean(axis=(0, 2))
    std = np.maximum(train.std(axis=(0, 2)), 1e-8)
    scaled = [
        (arr - mean[None, :, None]) / std[None, :, None] for arr in (train, *others)
    ]
    return scaled, mean, std


def standardize(
    train: Dataset, *others: Dataset
) -> tuple[list[Dataset], np.ndarray, np.ndarray]:
    """Dataset-level standardization; returns new datasets plus the stats."""
    stats_stack = np.stack([s.features for s in train.samples])
    mean = stats_stack.mean(axis=(0, 1))
    std = np.maximum(stats_stack.std(axis=(0, 1)), 1e-8)
    out = []
    for ds in (train, *others):
        scaled = [
            SequenceSample((s.features - mean) / std, s.class_label, s.domain_label)
            for s in ds.samples
        ]
        out.append(Dataset(scaled, dict(ds.provenance)))
    return out, mean, std


def make_batches(
    n: int,
    batch_size: int,
    seed: int | None = None,
    shuffle: bool = True,
    drop_last: bool = True,
):
    """Yield index arrays covering one epoch over ``n`` samples.

    Training uses shuffle + drop_last so every batch is full; evaluation
    keeps the final short batch.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if n < 1:
        raise DataError("cannot batch an empty dataset")
    order = np.arange(n)
    if shuffle:
        if seed is None:
            raise ConfigError("shuffled batching needs a seed")
        order = stream(seed, "batches", n).permutation(n)
    stop = n - n % batch_size if drop_last else n
    for start in range(0, stop, batch_size):
        yield order[start:start + batch_size]


def save_dataset(dataset: Dataset, path) -> None:
    """Write ``path``.bin (raw float64) and ``path``.json (manifest)."""
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    if not dataset.samples:
        raise DataError("refusing to save an empty dataset")
    block = np.stack([s.features for s in dataset.samples]).astype("<f8")
    manifest = {
        "format_version": _FORMAT_VERSION,
        "count": len(dataset),
        "length": dataset.length,
        "width": N_FEATURES,
        "class_labels": [s.class_label for s in dataset.samples],
        "domain_labels": [s.domain_label for s in dataset.samples],
        "provenance": dataset.provenance,
    }
    base.with_suffix(".bin").write_bytes(block.tobytes())
    base.with_suffix(".json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_dataset(path) -> Dataset:
    """Load a dataset saved by :func:`save_dataset` from its base path."""
    base = Path(path)
    manifest_path = base.with_suffix(".json")
    bin_path = base.with_suffix(".bin")
    if not manifest_path.exists():
        raise DataError(f"missing manifest: {manifest_path}")
    if not bin_path.exists():
        raise DataError(f"missing data block: {bin_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt manifest {manifest_path}: {exc}") from exc
    version = manifest.get("format_version")
    if version != _FORMAT_VERSION:
        raise DataError(
            f"unsupported dataset format version {version!r} in {manifest_path}"
        )
    count, length, width = (
        int(manifest["count"]),
        int(manifest["length"]),
        int(manifest["width"]),
    )
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    expected = count * length * width
    if raw.size != expected:
        raise DataError(
            f"data block {bin_path} holds {raw.size} values, expected {expected}"
        )
    block = raw.reshape(count, length, width)
    class_labels = manifest["class_labels"]
    domain_labels = manifest["domain_labels"]
    if len(class_labels) != count or len(domain_labels) != count:
        raise DataError(f"manifest label lists do not match count in {manifest_path}")
    samples = [
        SequenceSample(block[i].copy(), class_labels[i], domain_labels[i])
        for i in range(count)
    ]
    return Dataset(samples, manifest.get("provenance", {"loaded": str(base)}))


def _normalize_label(text: str) -> str:
    return " ".join(text.replace("-", " ").replace("_", " ").lower().split())


_LABEL_LOOKUP = {_normalize_label(name): i for i, name in enumerate(CLASS_NAMES)}


def import_csv_dataset(
    directory, expected_length: int | None = None, domain: str = TARGET
) -> Dataset:
    """Import a directory of per-sample CSV files indexed by manifest.csv.

    manifest.csv needs ``file`` and ``label`` columns (label text matched
    against the class names, case and separator insensitive; empty means
    unlabelled).  Each sample file is one header row plus ``length`` rows
    of 6 numeric columns.
    """
    root = Path(directory)
    manifest_path = root / "manifest.csv"
    if not manifest_path.exists():
        raise DataError(f"missing manifest.csv in {root}")
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"file", "label"} <= set(reader.fieldnames):
            raise DataError(f"{manifest_path} must have 'file' and 'label' columns")
        rows = list(reader)
    if not rows:
        raise DataError(f"{manifest_path} lists no samples")

    samples = []
    for row in rows:
        rel = row["file"].strip()
        label_text = row["label"].strip()
        sample_path = root / rel
        if not sample_path.exists():
            raise DataError(f"sample file listed in manifest not found: {sample_path}")
        if label_text:
            key = _normalize_label(label_text)
            if key not in _LABEL_LOOKUP:
                raise DataError(f"unknown class label {label_text!r} for {sample_path}")
            label = _LABEL_LOOKUP[key]
        else:
            label = None
        try:
            values = np.loadtxt(sample_path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise DataError(f"unparseable CSV {sample_path}: {exc}") from exc
        if values.ndim != 2 or values.shape[1] != N_FEATURES:
            raise DataError(
                f"{sample_path} has {values.shape[1] if values.ndim == 2 else '?'} "
                f"columns, expected {N_FEATURES}"
            )
        if expected_length is not None and values.shape[0] != expected_length:
            raise DataError(
                f"{sample_path} has {values.shape[0]} rows, expected {expected_length}"
            )
        samples.append(SequenceSample(values, label, domain))
    return Dataset(samples, {"loaded": str(root)})
