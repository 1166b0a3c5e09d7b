"""White-box FGSM attack and robustness evaluation.

The attack perturbs each pixel by epsilon times the sign of the input
gradient of the cross-entropy loss.  Epsilon is stated in raw [0, 1]
pixel units; internally the perturbation and clamping happen in raw space
(sign is invariant to the positive normalization scale), and the result is
re-standardized, so adversarial images always correspond to valid images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, NormalizationStats
from .errors import DataError
from .layers import softmax_cross_entropy
from .models import Model
from .tensor import DTYPE


@dataclass
class AttackConfig:
    epsilon: float = 0.15       # raw [0, 1] pixel units
    sample_count: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise DataError(f"epsilon must be >= 0, got {self.epsilon}")


def input_gradient(model: Model, images: np.ndarray,
                   labels: np.ndarray) -> np.ndarray:
    """d(mean cross-entropy)/d(images) from one forward/backward pass."""
    logits = model.forward(images, train_mode=True)
    _, grad_logits = softmax_cross_entropy(logits, labels)
    model.zero_grads()
    grad_in = model.backward(grad_logits)
    model.zero_grads()
    return grad_in


def fgsm_perturb(model: Model, images: np.ndarray, labels: np.ndarray,
                 epsilon: float, stats: NormalizationStats) -> np.ndarray:
    """x' = clamp_valid(x + eps * sign(grad_x loss)) in raw pixel space."""
    grad = input_gradient(model, images, labels)
    raw = images * stats.std + stats.mean
    raw_adv = np.clip(raw + epsilon * np.sign(grad), 0.0, 1.0)
    return ((raw_adv - stats.mean) / stats.std).astype(DTYPE)


def accuracy(model: Model, images: np.ndarray, labels: np.ndarray,
             batch_size: int = 200) -> float:
    correct = 0
    for start in range(0, len(labels), batch_size):
        logits = model.forward(images[start:start + batch_size], train_mode=False)
        correct += int((logits.argmax(axis=1)
                        == labels[start:start + batch_size]).sum())
    return correct / len(labels)


def evaluate_attack(models: dict[str, Model], dataset: Dataset,
                    config: AttackConfig, batch_size: int = 200):
    """Clean and attacked accuracy per model on a seeded sample.

    ``models`` maps a display name to a trained model.  The perturbation is
    white-box: computed against the model being evaluated.  Returns a list
    of row dicts (model, kernel, epsilon, clean_acc, attacked_acc).
    """
    n = len(dataset)
    if config.sample_count > n:
        raise DataError(
            f"sample_count {config.sample_count} exceeds dataset size {n}")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    idx = rng.choice(n, size=config.sample_count, replace=False)
    images = dataset.images[idx]
    labels = dataset.labels[idx]

    rows = []
    for name, model in models.items():
        clean = accuracy(model, images, labels, batch_size)
        correct = 0
        for start in range(0, len(labels), batch_size):
            xb = images[start:start + batch_size]
            yb = labels[start:start + batch_size]
            adv = fgsm_perturb(model, xb, yb, config.epsilon, dataset.stats)
            logits = model.forward(adv, train_mode=False)
            correct += int((logits.argmax(axis=1) == yb).sum())
        kernel = model.config.kernel1.kind if model.config and \
            model.config.arrangement.startswith("kerv") else "linear"
        rows.append({
            "model": name,
            "kernel": kernel,
            "epsilon": config.epsilon,
            "clean_acc": clean,
            "attacked_acc": correct / len(labels),
        })
    return rows
