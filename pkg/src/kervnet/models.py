"""Declarative LeNet-5 variants and the sequential model container.

A ``ModelConfig`` names the two sliding-window slots ("conv" forces the
linear kernel, "kerv" uses the configured kernel spec), whether ReLU
layers are present, and the pooling flavor.  ``build_lenet5`` turns a
config into the fixed architecture

    slot1(1->6, 5x5, pad 2) -> [relu] -> pool 2x2
    -> slot2(6->16, 5x5) -> [relu] -> pool 2x2
    -> flatten(400) -> dense 400->120 -> [relu]
    -> dense 120->84 -> [relu] -> dense 84->10

on 28x28 inputs (pad 2 on the first slot keeps the classic 400-unit
flatten without resampling to 32x32).

Checkpoints are a text header (format version + the config as key=value
lines) followed by each parameter tensor in declaration order as
little-endian float64 with a shape prefix.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError
from .kernels import KernelSpec
from .layers import (AvgPool2d, Dense, Flatten, Kerv2d, Layer, MaxPool2d,
                     ReLU)
from .tensor import DTYPE

ARRANGEMENTS = ("conv-conv", "kerv-conv", "conv-kerv", "kerv-kerv")

CHECKPOINT_MAGIC = "KERVNET-CHECKPOINT"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    arrangement: str = "conv-conv"
    kernel1: KernelSpec = field(default_factory=lambda: KernelSpec("linear"))
    kernel2: KernelSpec = field(default_factory=lambda: KernelSpec("linear"))
    use_relu: bool = True
    pooling: str = "max"
    use_bias: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.arrangement not in ARRANGEMENTS:
            raise ConfigError(f"arrangement must be one of {ARRANGEMENTS}, "
                              f"got {self.arrangement!r}")
        if self.pooling not in ("max", "avg"):
            raise ConfigError(f"pooling must be 'max' or 'avg', got {self.pooling!r}")

    def slot_specs(self) -> tuple[KernelSpec, KernelSpec]:
        """Kernel spec per slot; conv slots force the linear kernel."""
        first, second = self.arrangement.split("-")
        spec1 = self.kernel1 if first == "kerv" else KernelSpec("linear")
        spec2 = self.kernel2 if second == "kerv" else KernelSpec("linear")
        return spec1, spec2


def config_to_text(config: ModelConfig) -> str:
    """Flat key=value serialization; round-trips losslessly."""
    lines = [
        f"arrangement={config.arrangement}",
        f"use_relu={str(config.use_relu).lower()}",
        f"pooling={config.pooling}",
        f"use_bias={str(config.use_bias).lower()}",
        f"seed={config.seed}",
    ]
    for slot, spec in (("kernel1", config.kernel1), ("kernel2", config.kernel2)):
        lines.append(f"{slot}.kind={spec.kind}")
        lines.append(f"{slot}.degree={spec.degree}")
        lines.append(f"{slot}.coef0={spec.coef0!r}")
        lines.append(f"{slot}.gamma={spec.gamma!r}")
        lines.append(f"{slot}.learn_coef0={str(spec.learn_coef0).lower()}")
        lines.append(f"{slot}.learn_gamma={str(spec.learn_gamma).lower()}")
    return "\n".join(lines) + "\n"


def _parse_bool(value: str) -> bool:
    if value.lower() in ("true", "1", "yes", "on"):
        return True
    if value.lower() in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def config_from_text(text: str) -> ModelConfig:
    pairs = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()

    def spec_from(slot: str) -> KernelSpec:
        return KernelSpec(
            kind=pairs.get(f"{slot}.kind", "linear"),
            degree=int(pairs.get(f"{slot}.degree", 3)),
            coef0=float(pairs.get(f"{slot}.coef0", 1.0)),
            gamma=float(pairs.get(f"{slot}.gamma", 1.0)),
            learn_coef0=_parse_bool(pairs.get(f"{slot}.learn_coef0", "false")),
            learn_gamma=_parse_bool(pairs.get(f"{slot}.learn_gamma", "false")),
        )

    known = {"arrangement", "use_relu", "pooling", "use_bias", "seed"}
    for key in pairs:
        if key in known:
            continue
        slot, _, attr = key.partition(".")
        if slot in ("kernel1", "kernel2") and attr in (
                "kind", "degree", "coef0", "gamma", "learn_coef0", "learn_gamma"):
            continue
        raise ConfigError(f"unknown model config key {key!r}")
    return ModelConfig(
        arrangement=pairs.get("arrangement", "conv-conv"),
        kernel1=spec_from("kernel1"),
        kernel2=spec_from("kernel2"),
        use_relu=_parse_bool(pairs.get("use_relu", "true")),
        pooling=pairs.get("pooling", "max"),
        use_bias=_parse_bool(pairs.get("use_bias", "true")),
        seed=int(pairs.get("seed", 0)),
    )


class Model:
    """Ordered layer list with sequential forward/backward."""

    def __init__(self, layers: list[Layer], config: ModelConfig | None = None):
        self.layers = layers
        self.config = config

    def forward(self, x: np.ndarray, train_mode: bool = True) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train_mode)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def param_tags(self) -> list[str]:
        return [t for layer in self.layers for t in layer.param_tags()]

    def zero_grads(self):
        for layer in self.layers:
            layer.zero_grads()

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def kernel_hypers(self) -> dict[str, float]:
        """Current learnable hyperparameter values, keyed slot{i}.{name}."""
        out = {}
        slot = 0
        for layer in self.layers:
            if isinstance(layer, Kerv2d):
                slot += 1
                for name, arr in sorted(layer.hyper.items()):
                    out[f"kernel{slot}.{name}"] = float(arr[0])
        return out

    def describe(self) -> str:
        return " -> ".join(layer.describe() for layer in self.layers)

    def save(self, path):
        if self.config is None:
            raise ConfigError("only models built from a ModelConfig can be saved")
        with open(path, "wb") as fh:
            header = io.StringIO()
            header.write(f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}\n")
            header.write(config_to_text(self.config))
            header.write("---\n")
            fh.write(header.getvalue().encode("utf-8"))
            for p in self.params():
                fh.write(np.int32(p.ndim).astype("<i4").tobytes())
                fh.write(np.asarray(p.shape, dtype="<i8").tobytes())
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Model":
        with open(path, "rb") as fh:
            blob = fh.read()
        sep = blob.find(b"---\n")
        if sep < 0:
            raise FormatError("checkpoint missing header separator")
        header = blob[:sep].decode("utf-8")
        lines = header.splitlines()
        if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
            raise FormatError(
                f"bad checkpoint magic: expected {CHECKPOINT_MAGIC!r}, "
                f"found {lines[0][:32]!r}" if lines else "empty checkpoint")
        config = config_from_text("\n".join(lines[1:]))
        model = build_lenet5(config)
        offset = sep + 4
        for p in model.params():
            ndim = int(np.frombuffer(blob, "<i4", count=1, offset=offset)[0])
            offset += 4
            shape = tuple(np.frombuffer(blob, "<i8", count=ndim, offset=offset))
            offset += 8 * ndim
            if shape != p.shape:
                raise FormatError(
                    f"checkpoint tensor shape {shape} does not match model "
                    f"parameter shape {p.shape}")
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(blob, "<f8", count=count, offset=offset)
            offset += 8 * count
            p[...] = data.reshape(shape)
        if offset != len(blob):
            raise FormatError(
                f"checkpoint has {len(blob) - offset} trailing bytes")
        return model


def build_lenet5(config: ModelConfig) -> Model:
    """LeNet-5 variant for 28x28 single-channel inputs, 10 classes."""
    spec1, spec2 = config.slot_specs()
    pool = MaxPool2d if config.pooling == "max" else AvgPool2d
    seed = config.seed
    layers: list[Layer] = []
    layers.append(Kerv2d(1, 6, 5, stride=1, padding=2, bias=config.use_bias,
                         spec=spec1, seed=seed * 7919 + 1))
    if config.use_relu:
        layers.append(ReLU())
    layers.append(pool(2, 2))
    layers.append(Kerv2d(6, 16, 5, stride=1, padding=0, bias=config.use_bias,
                         spec=spec2, seed=seed * 7919 + 2))
    if config.use_relu:
        layers.append(ReLU())
    layers.append(pool(2, 2))
    layers.append(Flatten())
    layers.append(Dense(16 * 5 * 5, 120, seed=seed * 7919 + 3))
    if config.use_relu:
        layers.append(ReLU())
    layers.append(Dense(120, 84, seed=seed * 7919 + 4))
    if config.use_relu:
        layers.append(ReLU())
    layers.append(Dense(84, 10, seed=seed * 7919 + 5))
    return Model(layers, config)
