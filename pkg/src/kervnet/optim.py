"""SGD with momentum, weight decay, milestone LR schedule, and projection.

The update is the velocity form with decay folded into the gradient first:

    v <- momentum * v + (grad + weight_decay * param)
    param <- param - lr * v

Weight decay applies to "weight" and "bias" tagged parameters only;
decaying a kernel hyperparameter toward zero would silently change the
kernel's character.  Parameters tagged "kernel_hyper" are clamped to
>= 1e-6 after every step so positivity constraints survive optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .kernels import HYPER_FLOOR


@dataclass
class SgdConfig:
    lr: float = 0.003
    momentum: float = 0.9
    weight_decay: float = 0.0
    milestones: list[int] = field(default_factory=lambda: [10, 15])
    gamma: float = 0.1
    max_epochs: int = 20

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ConfigError(
                f"milestones must be strictly increasing, got {self.milestones}")


def lr_at_epoch(config: SgdConfig, epoch: int) -> float:
    """lr * gamma^(number of milestones <= epoch)."""
    drops = sum(1 for m in config.milestones if m <= epoch)
    return config.lr * config.gamma ** drops


class SGD:
    """Owns one velocity tensor per parameter; step order is fixed."""

    def __init__(self, params, grads, tags, config: SgdConfig):
        if not (len(params) == len(grads) == len(tags)):
            raise DimensionError(
                f"params/grads/tags lengths differ: "
                f"{len(params)}/{len(grads)}/{len(tags)}")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise DimensionError(
                    f"param shape {p.shape} does not match grad shape {g.shape}")
        self.params = params
        self.grads = grads
        self.tags = tags
        self.config = config
        self.velocities = [np.zeros_like(p) for p in params]

    def step(self, lr_now: float):
        wd = self.config.weight_decay
        mom = self.config.momentum
        for p, g, v, tag in zip(self.params, self.grads, self.velocities, self.tags):
            d = g + wd * p if (wd and tag != "kernel_hyper") else g
            v *= mom
            v += d
            p -= lr_now * v
            if tag == "kernel_hyper":
                np.maximum(p, HYPER_FLOOR, out=p)
