"""Model definitions: shared CNN backbone, label/domain heads, TCN baseline.

The adversarial model is a 1-d CNN feature extractor (two same-length conv
layers, 64 filters, kernel 3, ReLU, global average pooling) feeding two
small MLP heads: a 9-way fault classifier and a 2-way domain classifier
behind the gradient-reversal operator.  The plain CNN baseline is exactly
the adversarial model minus the domain head, and shares its initialization
stream, so with the adversarial loss disabled the two train identically.

All forwards are pure functions of (parameter mapping, input); parameters
live in a flat name -> Parameter dict so the optimizer, checkpointing and
the tape can treat every model uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    add,
    add_channel_bias,
    conv1d,
    global_avg_pool,
    grad_reverse,
    linear,
    pad1d,
    relu,
)
from .errors import ConfigError, DataError
from .rng import stream

__all__ = [
    "N_CLASSES",
    "N_DOMAINS",
    "HEAD_HIDDEN",
    "FeatureExtractorConfig",
    "TcnConfig",
    "ModelParams",
    "init_params",
    "feature_extract",
    "predict_label",
    "predict_domain",
    "forward_dann",
    "forward_cnn",
    "forward_tcn",
    "predict_classes",
    "save_checkpoint",
    "load_checkpoint",
]

N_CLASSES = 9
N_DOMAINS = 2
HEAD_HIDDEN = 128

MODEL_KINDS = ("dann", "cnn", "tcn")


@dataclass
class FeatureExtractorConfig:
    """Backbone shape for the adversarial model and the CNN baseline."""

    in_channels: int = 6
    conv_layers: int = 2
    filters: int = 64
    kernel: int = 3

    def validate(self) -> None:
        if self.in_channels < 1 or self.conv_layers < 1 or self.filters < 1:
            raise ConfigError(f"backbone sizes must be positive: {self}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be odd so padding preserves length, got {self.kernel}")

    @property
    def padding(self) -> int:
        return self.kernel // 2

    @property
    def feature_dim(self) -> int:
        return self.filters


@dataclass
class TcnConfig:
    """Dilated causal convolution baseline."""

    in_channels: int = 6
    levels: int = 4
    channels: int = 64
    kernel: int = 3

    def validate(self) -> None:
        if self.in_channels < 1 or self.levels < 1 or self.channels < 1:
            raise ConfigError(f"tcn sizes must be positive: {self}")
        if self.kernel < 2:
            raise ConfigError(f"tcn kernel must be >= 2, got {self.kernel}")

    def receptive_field(self) -> int:
        """1 + sum over levels of 2 * (kernel-1) * 2^level (two convs per block)."""
        return 1 + sum(2 * (self.kernel - 1) * 2 ** level for level in range(self.levels))

    def check_length(self, length: int) -> None:
        rf = self.receptive_field()
        if rf > length:
            raise ConfigError(
                f"tcn receptive field {rf} exceeds sequence length {length}"
            )


@dataclass
class ModelParams:
    """A model's parameters plus everything needed to rerun it.

    ``params`` is insertion-ordered; grouping is by name prefix
    (``feature.``, ``label_head.``, ``domain_head.``, ``tcn.``, ``head.``).
    Normalization statistics travel with the parameters so a checkpoint
    evaluates raw corpora without outside context.
    """

    kind: str
    arch: dict
    seed: int
    params: dict[str, Parameter]
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def group(self, prefix: str) -> dict[str, Parameter]:
        return {n: p for n, p in self.params.items() if n.startswith(prefix)}

    @property
    def feature(self) -> dict[str, Parameter]:
        return self.group("feature.")

    @property
    def label_head(self) -> dict[str, Parameter]:
        return self.group("label_head.")

    @property
    def domain_head(self) -> dict[str, Parameter]:
        return self.group("domain_head.")

    def n_parameters(self) -> int:
        return sum(p.value.data.size for p in self.params.values())

    def values(self) -> dict[str, Tensor]:
        """Constant tensors for tape-free evaluation forwards."""
        return {n: p.value for n, p in self.params.items()}

    def copy(self) -> "ModelParams":
        clone = {n: Parameter(n, p.value.data.copy()) for n, p in self.params.items()}
        return ModelParams(
            self.kind,
            dict(self.arch),
            self.seed,
            clone,
            None if self.norm_mean is None else self.norm_mean.copy(),
            None if self.norm_std is None else self.norm_std.copy(),
            dict(self.extras),
        )

    def backbone_config(self) -> FeatureExtractorConfig:
        if self.kind not in ("dann", "cnn"):
            raise ConfigError(f"model kind {self.kind!r} has no CNN backbone")
        return FeatureExtractorConfig(**self.arch)

    def tcn_config(self) -> TcnConfig:
        if self.kind != "tcn":
            raise ConfigError(f"model kind {self.kind!r} is not a tcn")
        return TcnConfig(**self.arch)


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


def _new_param(seed: int, name: str, shape: tuple[int, ...], fan_in: int) -> Parameter:
    # Keyed by (seed, name) only, never by model kind: models that share a
    # submodule by name initialize it identically under the same seed.
    return Parameter(name, _uniform_init(stream(seed, "init", name), shape, fan_in))


def _mlp_head_params(seed: int, prefix: str, in_dim: int, out_dim: int) -> dict[str, Parameter]:
    names_shapes = [
        (f"{prefix}.fc1.weight", (HEAD_HIDDEN, in_dim), in_dim),
        (f"{prefix}.fc1.bias", (HEAD_HIDDEN,), in_dim),
        (f"{prefix}.fc2.weight", (out_dim, HEAD_HIDDEN), HEAD_HIDDEN),
        (f"{prefix}.fc2.bias", (out_dim,), HEAD_HIDDEN),
    ]
    return {n: _new_param(seed, n, s, f) for n, s, f in names_shapes}


def init_params(kind: str, arch, seed: int) -> ModelParams:
    """Fresh parameters for one model kind under one seed."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}, expected one of {MODEL_KINDS}")
    params: dict[str, Parameter] = {}
    if kind in ("dann", "cnn"):
        cfg = arch if isinstance(arch, FeatureExtractorConfig) else FeatureExtractorConfig(**arch)
        cfg.validate()
        c_in = cfg.in_channels
        for layer in range(1, cfg.conv_layers + 1):
            w_name = f"feature.conv{layer}.weight"
            b_name = f"feature.conv{layer}.bias"
            fan_in = c_in * cfg.kernel
            params[w_name] = _new_param(seed, w_name, (cfg.filters, c_in, cfg.kernel), fan_in)
            params[b_name] = _new_param(seed, b_name, (cfg.filters,), fan_in)
            c_in = cfg.filters
        params.update(_mlp_head_params(seed, "label_head", cfg.feature_dim, N_CLASSES))
        if kind == "dann":
            params.update(_mlp_head_params(seed, "domain_head", cfg.feature_dim, N_DOMAINS))
        arch_dict = asdict(cfg)
    else:
        cfg = arch if isinstance(arch, TcnConfig) else TcnConfig(**arch)
        cfg.validate()
        c_in = cfg.in_channels
        for level in range(cfg.levels):
            for conv in (1, 2):
                w_name = f"tcn.block{level}.conv{conv}.weight"
                b_name = f"tcn.block{level}.conv{conv}.bias"
                fan_in = c_in * cfg.kernel
                params[w_name] = _new_param(
                    seed, w_name, (cfg.channels, c_in, cfg.kernel), fan_in
                )
                params[b_name] = _new_param(seed, b_name, (cfg.channels,), fan_in)
                c_in = cfg.channels
        params.update(
            {
                "head.weight": _new_param(
                    seed, "head.weight", (N_CLASSES, cfg.channels), cfg.channels
                ),
                "head.bias": _new_param(seed, "head.bias", (N_CLASSES,), cfg.channels),
            }
        )
        arch_dict = asdict(cfg)
    return ModelParams(kind, arch_dict, int(seed), params)


def feature_extract(values, cfg: FeatureExtractorConfig, batch) -> Tensor:
    """Backbone: stacked same-length convs + ReLU, then mean over time."""
    h = batch
    for layer in range(1, cfg.conv_layers + 1):
        h = conv1d(h, values[f"feature.conv{layer}.weight"], padding=cfg.padding)
        h = relu(add_channel_bias(h, values[f"feature.conv{layer}.bias"]))
    return global_avg_pool(h)


def _mlp_head(values, prefix: str, x) -> Tensor:
    h = relu(linear(x, values[f"{prefix}.fc1.weight"], values[f"{prefix}.fc1.bias"]))
    return linear(h, values[f"{prefix}.fc2.weight"], values[f"{prefix}.fc2.bias"])


def predict_label(values, features) -> Tensor:
    """Fault-class logits [batch, 9] from pooled features."""
    return _mlp_head(values, "label_head", features)


def predict_domain(values, features, lam: float) -> Tensor:
    """Domain logits [batch, 2]; gradients to the features arrive scaled by -lam."""
    return _mlp_head(values, "domain_head", grad_reverse(features, lam))


def forward_dann(values, cfg: FeatureExtractorConfig, batch, lam: float):
    """(class_logits, domain_logits); the backbone runs once and fans out."""
    features = feature_extract(values, cfg, batch)
    return predict_label(values, features), predict_domain(values, features, lam)


def forward_cnn(values, cfg: FeatureExtractorConfig, batch) -> Tensor:
    """Baseline classifier: backbone + label head only."""
    return predict_label(values, feature_extract(values, cfg, batch))


def _tcn_stack(values, cfg: TcnConfig, batch) -> Tensor:
    """Residual blocks of two front-padded dilated convs each; causal by
    construction because only past samples enter each tap."""
    h = batch
    for level in range(cfg.levels):
        dilation = 2 ** level
        front = (cfg.kernel - 1) * dilation
        y = h
        for conv in (1, 2):
            y = conv1d(
                pad1d(y, front, 0),
                values[f"tcn.block{level}.conv{conv}.weight"],
                dilation=dilation,
            )
            y = relu(add_channel_bias(y, values[f"tcn.block{level}.conv{conv}.bias"]))
        in_ch = h.data.shape[1] if isinstance(h, Tensor) else np.asarray(h).shape[1]
        h = add(y, h) if in_ch == cfg.channels else y
    return h


def forward_tcn(values, cfg: TcnConfig, batch) -> Tensor:
    """Dilated causal conv stack with residual blocks, then a linear head."""
    if isinstance(batch, Tensor):
        length = batch.data.shape[2]
    else:
        length = np.asarray(batch).shape[2]
    cfg.check_length(length)
    pooled = global_avg_pool(_tcn_stack(values, cfg, batch))
    return linear(pooled, values["head.weight"], values["head.bias"])


def class_logits(mp: ModelParams, values, batch) -> Tensor:
    """Label logits under whichever architecture ``mp`` carries."""
    if mp.kind in ("dann", "cnn"):
        return forward_cnn(values, mp.backbone_config(), batch)
    return forward_tcn(values, mp.tcn_config(), batch)


def predict_classes(mp: ModelParams, features: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class predictions for a standardized [n, channels, len] array."""
    values = mp.values()
    out = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], batch_size):
        chunk = Tensor(features[start:start + batch_size])
        logits = class_logits(mp, values, chunk)
        out[start:start + batch_size] = logits.data.argmax(axis=1)
    return out


_CHECKPOINT_VERSION = 1


def save_checkpoint(mp: ModelParams, path) -> None:
    """Write ``path``.bin (concatenated float64 buffers) and ``path``.json."""
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    blobs = []
    for name, p in mp.params.items():
        arr = np.ascontiguousarray(p.value.data, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "format_version": _CHECKPOINT_VERSION,
        "kind": mp.kind,
        "arch": mp.arch,
        "seed": mp.seed,
        "params": entries,
        "total_bytes": offset,
        "norm_mean": None if mp.norm_mean is None else mp.norm_mean.tolist(),
        "norm_std": None if mp.norm_std is None else mp.norm_std.tolist(),
        "extras": mp.extras,
    }
    base.with_suffix(".bin").write_bytes(b"".join(blobs))
    base.with_suffix(".json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_checkpoint(path) -> ModelParams:
    base = Path(path)
    manifest_path = base.with_suffix(".json")
    bin_path = base.with_suffix(".bin")
    if not manifest_path.exists() or not bin_path.exists():
        raise DataError(f"checkpoint incomplete: need {manifest_path} and {bin_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt checkpoint manifest {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != _CHECKPOINT_VERSION:
        raise DataError(
            f"unsupported checkpoint version {manifest.get('format_version')!r}"
        )
    raw = bin_path.read_bytes()
    if len(raw) != manifest["total_bytes"]:
        raise DataError(
            f"checkpoint block {bin_path} holds {len(raw)} bytes, "
            f"expected {manifest['total_bytes']}"
        )
    params: dict[str, Parameter] = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=start).reshape(shape)
        params[entry["name"]] = Parameter(entry["name"], arr.copy())
    mp = ModelParams(
        kind=manifest["kind"],
        arch=manifest["arch"],
        seed=int(manifest["seed"]),
        params=params,
        norm_mean=None if manifest["norm_mean"] is None else np.array(manifest["norm_mean"]),
        norm_std=None if manifest["norm_std"] is None else np.array(manifest["norm_std"]),
        extras=manifest.get("extras", {}),
    )
    if mp.kind not in MODEL_KINDS:
        raise DataError(f"checkpoint has unknown model kind {mp.kind!r}")
    return mp
